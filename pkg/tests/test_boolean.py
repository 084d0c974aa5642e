import itertools
import math

import numpy as np
import pytest

from robust_sfft.boolean_sfft import (
    BooleanSfftConfig,
    ListEntry,
    boolean_sfft,
    bucket_of,
    bucket_spectrum,
    check_isolation,
    filtered_bucket_oracle,
)
from robust_sfft.oracles import NoiseParams, NoisyOracle
from robust_sfft.rng import derive_rng
from robust_sfft.spectral import (
    BooleanSpectrum,
    F2Matrix,
    boolean_dft,
    f2_rank,
    random_invertible_f2,
)


def lifted_table(oracle, ell):
    return oracle.query(np.arange(2**ell))


def collision_sum(f: BooleanSpectrum, A: F2Matrix, b: int, ell: int) -> dict:
    """Oracle: bucket beta collects (-1)^<b, xi> f^(xi) over xi with (A^T xi)_[ell] = beta."""
    mask = (1 << ell) - 1
    out = {}
    for xi, c in f.entries.items():
        image = 0
        for i in range(f.n):
            # row i of A^T is column i of A
            bit = bin(sum(int(A.bits[j, i]) << j for j in range(f.n)) & xi).count("1") & 1
            image |= bit << i
        beta = image & mask
        out[beta] = out.get(beta, 0.0) + (-1) ** bin(b & xi).count("1") * c
    return out


def invertible_matrices(n):
    for flat in itertools.product((0, 1), repeat=n * n):
        A = F2Matrix(np.array(flat, dtype=np.uint8).reshape(n, n))
        if f2_rank(A) == n:
            yield A


# -- list entries ------------------------------------------------------------------


def test_list_entry_lifecycle():
    e = ListEntry.fresh(3, 4)
    assert str(e) == "****" and not e.finalized
    for i, v in enumerate([1, 0, 1, 1]):
        e.set_bit(i, v)
    assert e.finalized and e.value() == 0b1101
    e.nullify()
    e.set_bit(0, 0)
    assert str(e) == "null" and not e.finalized
    with pytest.raises(ValueError):
        e.value()


def test_default_ell():
    assert BooleanSfftConfig(k=4, delta=0.2, eta=1).resolved_ell(40) == 14
    assert BooleanSfftConfig(k=4, delta=0.2, eta=1).resolved_ell(10) == 10
    with pytest.raises(ValueError):
        BooleanSfftConfig(k=16, delta=0.2, eta=1, ell=3).resolved_ell(20)


def test_inner_gamma():
    cfg = BooleanSfftConfig(k=4, delta=0.2, eta=1)
    assert cfg.decode_config(10).gamma == pytest.approx(1e-3 / 40)
    assert cfg.refit_samples(10) == math.ceil(8 * 16 * 10 / 0.04)


# -- bucket oracle ---------------------------------------------------------------------


def test_constant_bucket():
    f = BooleanSpectrum(5, {0: 2.5})
    A = random_invertible_f2(5, derive_rng(1))
    z = filtered_bucket_oracle(NoisyOracle(f, NoiseParams()), A, 0, 3)
    assert boolean_dft(lifted_table(z, 3)).allclose(BooleanSpectrum(3, {0: 2.5}))


def test_single_character_bucket():
    rng = derive_rng(2)
    xi0 = 0b10110
    f = BooleanSpectrum(5, {xi0: -1.0})
    A = random_invertible_f2(5, rng)
    b = int(rng.integers(32))
    z = filtered_bucket_oracle(NoisyOracle(f, NoiseParams()), A, b, 3)
    spec = boolean_dft(lifted_table(z, 3))
    beta = int(bucket_of(A, [xi0], 3)[0])
    assert spec.support == {beta}
    assert abs(spec[beta]) == pytest.approx(1.0)


def test_bucket_identity_random_n6():
    rng = derive_rng(3, "bucket6")
    worst = 0.0
    for _ in range(200):
        freqs = rng.choice(64, 3, replace=False)
        f = BooleanSpectrum(6, dict(zip(freqs.tolist(), rng.standard_normal(3))))
        A = random_invertible_f2(6, rng)
        b = int(rng.integers(64))
        spec = boolean_dft(lifted_table(filtered_bucket_oracle(NoisyOracle(f, NoiseParams()), A, b, 4), 4))
        ref = collision_sum(f, A, b, 4)
        closed = bucket_spectrum(f, A, b, 4)
        for beta in range(16):
            worst = max(worst, abs(spec[beta] - ref.get(beta, 0.0)), abs(closed[beta] - spec[beta]))
    assert worst <= 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_bucket_identity_exhaustive(n):
    rng = derive_rng(4, "bucket", n)
    f = BooleanSpectrum(n, dict(enumerate(rng.standard_normal(2**n))))
    oracle = NoisyOracle(f, NoiseParams())
    worst = 0.0
    for A in invertible_matrices(n):
        for b in range(2**n):
            for ell in range(1, n + 1):
                spec = boolean_dft(lifted_table(filtered_bucket_oracle(oracle, A, b, ell), ell))
                ref = collision_sum(f, A, b, ell)
                worst = max(worst, max(abs(spec[beta] - ref.get(beta, 0.0)) for beta in range(2**ell)))
    assert worst <= 1e-9


def test_bucket_identity_n4_all_shifts():
    rng = derive_rng(5, "bucket4")
    f = BooleanSpectrum(4, dict(enumerate(rng.standard_normal(16))))
    oracle = NoisyOracle(f, NoiseParams())
    worst = 0.0
    for _ in range(60):
        A = random_invertible_f2(4, rng)
        for b in range(16):
            for ell in range(1, 5):
                spec = boolean_dft(lifted_table(filtered_bucket_oracle(oracle, A, b, ell), ell))
                ref = collision_sum(f, A, b, ell)
                worst = max(worst, max(abs(spec[beta] - ref.get(beta, 0.0)) for beta in range(2**ell)))
    assert worst <= 1e-9


def test_lifted_oracle_matches_subspace_filter():
    """The lifted oracle's spectrum equals that of y(Ax+b) H(x) on the full cube,
    H being 2^(n-ell) times the indicator of x_ell = ... = x_n = 0."""
    n, ell = 5, 3
    rng = derive_rng(6, "filter")
    f = BooleanSpectrum(n, dict(zip(rng.choice(32, 4, replace=False).tolist(), rng.standard_normal(4))))
    A = random_invertible_f2(n, rng)
    b = int(rng.integers(32))
    x = np.arange(2**n)
    H = np.where(x >> ell == 0, 2.0 ** (n - ell), 0.0)
    full = boolean_dft(f.evaluate(A.apply(x) ^ b) * H)
    lifted = boolean_dft(lifted_table(filtered_bucket_oracle(NoisyOracle(f, NoiseParams()), A, b, ell), ell))
    for eta in range(2**n):
        assert full[eta] == pytest.approx(lifted[eta & 7], abs=1e-12)


# -- isolation -------------------------------------------------------------------------


def test_isolation_single_frequency():
    A = random_invertible_f2(6, derive_rng(7))
    assert check_isolation(A, [0b101], 2).tolist() == [True]


def test_isolation_collision_under_identity():
    A = F2Matrix.identity(4)
    # both frequencies agree on the first two coordinates
    assert check_isolation(A, [0b0101, 0b1101, 0b0010], 2).tolist() == [False, False, True]


def test_isolation_rate_k8_ell16():
    rng = derive_rng(8, "iso")
    n, k, ell = 20, 8, 16
    hits = 0
    for _ in range(1000):
        freqs = rng.choice(2**n, k, replace=False)
        A = random_invertible_f2(n, rng)
        hits += bool(check_isolation(A, freqs, ell).all())
    rate = hits / 1000
    assert rate >= 0.99
    assert rate >= 1 - math.comb(k, 2) * 2.0**-ell - 0.02


# -- end to end -------------------------------------------------------------------------


def small_config(k, **kw):
    return BooleanSfftConfig(k=k, delta=0.4, eta=1.0, sample_constant=0.5, refit_constant=0.5,
                             max_sweep=8, **kw)


def test_zero_signal():
    f = BooleanSpectrum(6, {})
    result = boolean_sfft(NoisyOracle(f, NoiseParams()), 6, small_config(1))
    assert result.spectrum.norm(0) == 0
    assert "empty" in result.diagnostics


def test_one_sparse_noiseless_exact():
    f = BooleanSpectrum(8, {0b10110011: -1.5})
    result = boolean_sfft(NoisyOracle(f, NoiseParams()), 8, small_config(1, ell=4))
    assert result.spectrum.allclose(f, atol=1e-9)


def test_sign_decode_soundness_noiseless():
    for seed in range(3):
        rng = derive_rng(seed, "sound")
        f = BooleanSpectrum(8, {int(x): float(rng.choice([-1, 1]) * rng.uniform(1, 2))
                                for x in rng.choice(256, 3, replace=False)})
        cfg = small_config(3, ell=6, seed=seed)
        oracle = NoisyOracle(f, NoiseParams())
        result = boolean_sfft(oracle, 8, cfg)
        A = random_invertible_f2(8, derive_rng(seed, "boolean-sfft", "matrix"))
        if not check_isolation(A, sorted(f.support), 6).all():
            continue
        finalized = {int(s[::-1], 2) for s in result.diagnostics["finalized"]}
        assert finalized == set(f.support)
        assert result.spectrum.allclose(f, atol=1e-9)
        # query accounting
        inner = result.diagnostics["inner_m"]
        assert oracle.stats.query_count <= 2 * 8 * inner + result.m
