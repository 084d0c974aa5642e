"""Sparse FFT over {0,1}^n: hash into 2^ell buckets with a random invertible
map, decode each bucket spectrum with the LP decoder, and read off every
frequency bit from the sign change between a shift b and b + e_i."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decode import BooleanCharacters, DecodeConfig, DecodeResult, linear_decode
from .lp import l1_regression
from .oracles import MappedOracle
from .rng import derive_rng
from .spectral import BooleanSpectrum, F2Matrix, bitstring, chi, random_invertible_f2


@dataclass
class ListEntry:
    """Partially decoded frequency for one bucket; bits hold '0', '1' or '*'."""

    bucket: int
    bits: list[str]
    null: bool = False

    @classmethod
    def fresh(cls, bucket: int, n: int) -> "ListEntry":
        return cls(bucket, ["*"] * n)

    def set_bit(self, i: int, value: int) -> None:
        if not self.null:
            self.bits[i] = "1" if value else "0"

    def nullify(self) -> None:
        self.null = True

    @property
    def finalized(self) -> bool:
        return not self.null and "*" not in self.bits

    def value(self) -> int:
        """Packed frequency (bit i = coordinate i)."""
        if not self.finalized:
            raise ValueError("entry is not finalized")
        return sum(1 << i for i, b in enumerate(self.bits) if b == "1")

    def __str__(self) -> str:
        return "null" if self.null else "".join(self.bits)


@dataclass
class BooleanSfftConfig:
    k: int
    delta: float
    eta: float
    ell: int | None = None  # default 2*ceil(log2 k) + 10, capped at n
    sample_constant: float = 8.0  # inner decoder
    refit_constant: float = 8.0  # final regression, m = C k^2 n / delta^2
    max_sweep: int | None = None
    prune: float | None = 0.5
    lp_method: str = "highs"
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    def resolved_ell(self, n: int) -> int:
        ell = self.ell if self.ell is not None else 2 * math.ceil(math.log2(self.k)) + 10
        ell = min(ell, n)
        if ell < math.log2(self.k) + 1 and ell < n:
            raise ValueError(f"ell={ell} is below log2(k)+1")
        return ell

    def decode_config(self, n: int) -> DecodeConfig:
        return DecodeConfig(
            k=self.k,
            delta=self.delta,
            eta=self.eta,
            gamma=1e-3 / (self.k * n),
            sample_constant=self.sample_constant,
            max_sweep=self.max_sweep,
            prune=self.prune,
            lp_method=self.lp_method,
        )

    def refit_samples(self, n: int) -> int:
        return int(math.ceil(self.refit_constant * self.k**2 * n / self.delta**2))


def bucket_of(A: F2Matrix, freqs, ell: int) -> np.ndarray:
    """(A^T xi) restricted to its first ell coordinates."""
    return np.asarray(A.T.apply(np.asarray(freqs, dtype=np.int64))) & ((1 << ell) - 1)


def check_isolation(A: F2Matrix, frequencies, ell: int) -> np.ndarray:
    """Per frequency: True when no other frequency shares its bucket."""
    buckets = bucket_of(A, list(frequencies), ell)
    _, inverse, counts = np.unique(buckets, return_inverse=True, return_counts=True)
    return counts[inverse] == 1


def filtered_bucket_oracle(oracle, A: F2Matrix, b: int, ell: int) -> MappedOracle:
    """Oracle on {0,1}^ell whose value at u is y(A (u, 0, ..., 0) + b).

    The 2^(n-ell) factor of the subspace filter multiplies every bucket
    coefficient alike, so it is left out.
    """
    mask = (1 << ell) - 1

    def lift(u):
        return A.apply(np.asarray(u, dtype=np.int64) & mask) ^ b

    return MappedOracle(oracle, lift, "boolean", False)


def bucket_spectrum(signal: BooleanSpectrum, A: F2Matrix, b: int, ell: int) -> BooleanSpectrum:
    """Closed-form noiseless spectrum of the filtered bucket oracle."""
    out: dict[int, float] = {}
    if not signal.entries:
        return BooleanSpectrum(ell, {})
    freqs = np.array(sorted(signal.entries), dtype=np.int64)
    buckets = bucket_of(A, freqs, ell)
    signs = chi(freqs, b)
    for xi, bucket, sign in zip(freqs.tolist(), buckets.tolist(), np.atleast_1d(signs).tolist()):
        out[bucket] = out.get(bucket, 0.0) + sign * signal[xi]
    return BooleanSpectrum(ell, out)


def boolean_sfft(oracle, n: int, cfg: BooleanSfftConfig) -> DecodeResult:
    """Recover a k-sparse spectrum on {0,1}^n from outlier-corrupted queries."""
    ell = cfg.resolved_ell(n)
    inner = cfg.decode_config(n)
    A = random_invertible_f2(n, derive_rng(cfg.seed, "boolean-sfft", "matrix"))
    buckets = BooleanCharacters(ell)

    entries: dict[int, ListEntry] = {}
    inner_m = 0
    rounds = []
    for i in range(n):
        rng = derive_rng(cfg.seed, "boolean-sfft", "coord", i)
        b = int(rng.integers(0, 2**n))
        b2 = b ^ (1 << i)
        res = linear_decode(filtered_bucket_oracle(oracle, A, b, ell), buckets, inner, rng)
        res2 = linear_decode(filtered_bucket_oracle(oracle, A, b2, ell), buckets, inner, rng)
        inner_m = max(inner_m, res.m, res2.m)
        s1, s2 = res.spectrum, res2.spectrum
        both = s1.support & s2.support
        for bucket in s1.support | s2.support:
            entries.setdefault(bucket, ListEntry.fresh(bucket, n))
        for bucket in both:
            entries[bucket].set_bit(i, np.sign(s1[bucket]) != np.sign(s2[bucket]))
        # a bucket missing from either support in any round is dropped for good
        for bucket, entry in entries.items():
            if bucket not in both:
                entry.nullify()
        rounds.append({"coord": i, "b": bitstring(b, n), "support": sorted(s1.support),
                       "support_shifted": sorted(s2.support), "m": res.m})

    finalized = sorted({e.value() for e in entries.values() if e.finalized})
    diagnostics = {
        "ell": ell,
        "inner_m": inner_m,
        "list": {bitstring(k, ell): str(e) for k, e in sorted(entries.items())},
        "finalized": [bitstring(v, n) for v in finalized],
        "rounds": rounds,
    }
    if not finalized:
        diagnostics["empty"] = "no list entry survived every coordinate round"
        return DecodeResult(BooleanSpectrum(n, {}), m=0, delta_star=None,
                            diagnostics=diagnostics)

    rng = derive_rng(cfg.seed, "boolean-sfft", "refit")
    m = cfg.refit_samples(n)
    m = max(m, len(finalized))
    points = rng.integers(0, 2**n, size=m, dtype=np.int64)
    y = np.real(oracle.query(points)).astype(float)
    chars = BooleanCharacters(n, finalized)
    fit = l1_regression(chars.design(points), y, cfg.lp_method)
    if fit.status != "optimal":
        raise RuntimeError(f"final refit LP ended with status {fit.status}")
    coeffs = fit.coefficients.copy()
    if cfg.prune is not None:
        coeffs[np.abs(coeffs) < cfg.prune * cfg.eta] = 0
    return DecodeResult(
        spectrum=chars.spectrum(coeffs),
        m=m,
        delta_star=None,
        support=tuple(finalized),
        coefficients=fit.coefficients,
        residual=fit.residual,
        points=points,
        observations=y,
        diagnostics=diagnostics,
    )
