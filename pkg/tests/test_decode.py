import math

import numpy as np
import pytest

from robust_sfft.decode import (
    BooleanCharacters,
    CyclicCharacters,
    DecodeConfig,
    TorusCharacters,
    clamp_observations,
    k_sparse_bruteforce,
    linear_decode,
    top_k,
)
from robust_sfft.lp import l1_regression
from robust_sfft.oracles import NoiseParams, NoisyOracle
from robust_sfft.rng import derive_rng
from robust_sfft.spectral import BooleanSpectrum, CyclicSpectrum, TorusSpectrum

# tuned constants for the desk-scale Monte Carlo checks below
MC_CONSTANT = 0.2
MC_SWEEP = 20


def random_boolean(n, k, rng, lo=1.0, hi=2.0):
    freqs = rng.choice(2**n, k, replace=False)
    return BooleanSpectrum(n, {int(f): float(rng.choice([-1, 1]) * rng.uniform(lo, hi)) for f in freqs})


def test_config_validation():
    for bad in (dict(k=0), dict(delta=0), dict(delta=0.6), dict(eta=0), dict(gamma=1.0),
                dict(sigma=-1.0), dict(max_sweep=1)):
        kwargs = dict(k=1, delta=0.2, eta=1.0) | bad
        with pytest.raises(ValueError):
            DecodeConfig(**kwargs)


def test_sample_count_formula():
    cfg = DecodeConfig(k=2, delta=0.2, eta=1.0, gamma=0.01, sample_constant=1.0)
    expected = math.ceil(4 * math.log(16) * math.log(100) / 0.04)
    assert cfg.num_samples(16) == expected


def test_top_k_ties_go_to_lower_frequency():
    assert top_k([1.0, -2.0, 2.0, 0.5], 2).tolist() == [1, 2]
    assert top_k([1.0, 1.0, 1.0], 2).tolist() == [0, 1]


def test_clamp_observations():
    y = clamp_observations(np.array([1.0, -1e9]), eta=1.0, k=1)
    assert y[1] == -2e6 and y[0] == 1.0


def test_noiseless_one_sparse_exact():
    f = BooleanSpectrum(3, {0b101: 1.0})
    oracle = NoisyOracle(f, NoiseParams())
    result = linear_decode(oracle, BooleanCharacters(3), DecodeConfig(k=1, delta=0.5, eta=1.0),
                           derive_rng(1))
    assert result.spectrum.allclose(f, atol=1e-9)
    assert result.delta_star == 0.0


def test_zero_signal_zero_outliers():
    f = BooleanSpectrum(3, {})
    oracle = NoisyOracle(f, NoiseParams(rho=0.4, outlier_strategy="zero", seed=2))
    cfg = DecodeConfig(k=2, delta=0.1, eta=1.0, max_sweep=10)
    result = linear_decode(oracle, BooleanCharacters(3), cfg, derive_rng(2), m=40)
    assert result.spectrum.norm(0) == 0


def test_recovery_rate_sixteen_characters():
    hits = 0
    for trial in range(30):
        rng = derive_rng(trial, "dec16")
        f = random_boolean(4, 2, rng)
        oracle = NoisyOracle(f, NoiseParams(rho=0.3, epsilon=0.02, seed=trial))
        cfg = DecodeConfig(k=2, delta=0.2, eta=1.0, sample_constant=MC_CONSTANT, max_sweep=MC_SWEEP)
        result = linear_decode(oracle, BooleanCharacters(4), cfg, derive_rng(trial, "pts"))
        err = max(abs(result.spectrum[x] - f[x]) for x in range(16))
        hits += result.spectrum.support == f.support and err <= 1 / 3
    assert hits / 30 >= 0.9


def test_output_sparsity_and_monotone_objective():
    rng = derive_rng(3, "mono")
    f = random_boolean(5, 3, rng)
    oracle = NoisyOracle(f, NoiseParams(rho=0.2, epsilon=0.05, seed=3))
    cfg = DecodeConfig(k=3, delta=0.3, eta=1.0, sample_constant=0.3, max_sweep=40)
    result = linear_decode(oracle, BooleanCharacters(5), cfg, derive_rng(3, "pts"))
    assert result.spectrum.norm(0) <= 3
    objectives = [row["objective"] for row in result.sweep if row["objective"] is not None]
    assert len(objectives) >= 5
    assert all(b <= a + 1e-6 for a, b in zip(objectives, objectives[1:]))
    table = result.sweep_table()
    assert set(table[0]) >= {"budget", "objective", "residual"}


def test_residual_dominance():
    chars = BooleanCharacters(5)
    checked = 0
    for trial in range(10):
        rng = derive_rng(trial, "dominance")
        f = random_boolean(5, 2, rng)
        oracle = NoisyOracle(f, NoiseParams(rho=0.25, epsilon=0.02, seed=trial))
        cfg = DecodeConfig(k=2, delta=0.25, eta=1.0, sample_constant=0.2, max_sweep=30)
        result = linear_decode(oracle, chars, cfg, derive_rng(trial, "pts"))
        true_idx = tuple(sorted(f.support))
        if true_idx not in {row["support"] for row in result.sweep}:
            continue
        design = chars.design(result.points)[:, list(true_idx)]
        ref = l1_regression(design, result.observations, "highs")
        assert result.residual <= ref.residual + 1e-7
        checked += 1
    assert checked >= 5


def test_noiseless_exactness_on_torus():
    F = 3
    f = TorusSpectrum(F, {-2: 1 - 1j, 3: 0.5})
    oracle = NoisyOracle(f, NoiseParams())
    cfg = DecodeConfig(k=2, delta=0.5, eta=0.5, max_sweep=10)
    result = linear_decode(oracle, TorusCharacters(F), cfg, derive_rng(4), m=20)
    assert result.spectrum.allclose(f, atol=1e-6)


def test_cyclic_characters_decode():
    f = CyclicSpectrum(7, {3: 1.0 + 0.5j})
    oracle = NoisyOracle(f, NoiseParams())
    result = linear_decode(oracle, CyclicCharacters(7), DecodeConfig(k=1, delta=0.5, eta=1.0),
                           derive_rng(5), m=7)
    assert result.spectrum.allclose(f, atol=1e-6)


def test_k_larger_than_set_rejected():
    with pytest.raises(ValueError):
        linear_decode(NoisyOracle(BooleanSpectrum(1, {}), NoiseParams()), BooleanCharacters(1),
                      DecodeConfig(k=3, delta=0.2, eta=1.0), derive_rng(0))


# -- brute force reference ---------------------------------------------------------------


def test_bruteforce_full_support_is_regression():
    chars = BooleanCharacters(2)
    rng = derive_rng(6, "bf")
    x = rng.integers(0, 4, 12)
    y = rng.standard_normal(12)
    result = k_sparse_bruteforce(x, y, chars, 4)
    ref = l1_regression(chars.design(x), y, "highs")
    assert result.residual == pytest.approx(ref.residual, abs=1e-9)


def test_bruteforce_noiseless_exact():
    chars = BooleanCharacters(3)
    f = BooleanSpectrum(3, {1: 1.0, 6: -0.5})
    x = np.arange(8)
    result = k_sparse_bruteforce(x, f.evaluate(x), chars, 2)
    assert result.residual == pytest.approx(0, abs=1e-9)
    assert result.spectrum.allclose(f, atol=1e-9)


def test_bruteforce_guard():
    with pytest.raises(ValueError):
        k_sparse_bruteforce(np.arange(4), np.zeros(4), BooleanCharacters(10), 3, limit=100)


def test_decoder_agrees_with_bruteforce():
    chars = BooleanCharacters(3)
    agree = 0
    for trial in range(100):
        rng = derive_rng(trial, "bf8")
        f = BooleanSpectrum(3, {int(rng.integers(8)): float(rng.choice([-1, 1]))})
        oracle = NoisyOracle(f, NoiseParams(rho=0.25, seed=trial))
        cfg = DecodeConfig(k=1, delta=0.25, eta=1.0, sample_constant=MC_CONSTANT, max_sweep=MC_SWEEP)
        result = linear_decode(oracle, chars, cfg, derive_rng(trial, "p"))
        ref = k_sparse_bruteforce(result.points, result.observations, chars, 1)
        agree += ref.support == result.support
    assert agree >= 95


def test_failed_budgets_are_skipped(monkeypatch):
    import robust_sfft.decode as dec
    from robust_sfft.lp import L1Fit

    class Broken:
        def __init__(self, *args, **kwargs):
            pass

        def solve(self, budget):
            return L1Fit("numerical_error", None, None, None)

    monkeypatch.setattr(dec, "BudgetSweep", Broken)
    f = BooleanSpectrum(2, {1: 5.0})
    cfg = DecodeConfig(k=1, delta=0.2, eta=1.0, max_sweep=5)
    result = dec.linear_decode(NoisyOracle(f, NoiseParams()), BooleanCharacters(2), cfg,
                               derive_rng(0), m=4)
    statuses = [row["status"] for row in result.sweep]
    assert "numerical_error" in statuses
    # only the budgets at or above sum |y| survive, where g = 0 is the optimum
    assert result.spectrum.norm(0) == 0
