"""Sparse FFT on the torus under random outliers.

Frequencies are hashed into Z_B for a random prime B by sampling on a shifted
1/B grid; each bucket spectrum comes from the LP decoder. A second grid shifted
by Delta turns the ratio of the two bucket coefficients into the phase
2 pi Delta xi, and doubling Delta each round pins xi one bit at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decode import CyclicCharacters, DecodeConfig, DecodeResult, TorusCharacters, linear_decode
from .lp import l1_regression
from .oracles import MappedOracle, min_circular_gap
from .rng import derive_rng
from .spectral import MAX_TORUS_BANDLIMIT, TorusSpectrum


def desk_prime_floor(k: int, F: int) -> int:
    return int(math.ceil(max(2 * k * math.log2(2 * F), 4 * k**2)))


def asymptotic_prime_parameters(k: int, F: int, delta: float) -> tuple[float, float]:
    """The asymptotic floor (k log F / delta)^10 and pool size 10^3 k^2 log F.

    Far beyond desk scale; kept for reference and for configs that want them.
    """
    logF = math.log2(max(F, 2))
    return (k * logF / delta) ** 10, 1e3 * k**2 * logF


def primes_above(floor: int, count: int) -> list[int]:
    """The first ``count`` primes strictly greater than ``floor``."""
    from sympy import nextprime

    out, p = [], int(floor)
    for _ in range(count):
        p = int(nextprime(p))
        out.append(p)
    return out


@dataclass
class TorusSfftConfig:
    F: int
    k: int
    delta: float
    eta: float
    prime_floor: int | None = None  # None: desk floor max(2k log2(2F), 4k^2)
    prime_pool_size: int = 1000
    sample_constant: float = 8.0  # inner decoder
    refit_constant: float = 8.0  # final regression, m = C k^2 / delta^2
    max_sweep: int | None = None
    prune: float | None = 0.5
    lp_method: str = "highs"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.F <= MAX_TORUS_BANDLIMIT:
            raise ValueError(f"bandlimit must lie in [1, 2^40], got {self.F}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.prime_pool_size < 1:
            raise ValueError("prime pool must be non-empty")

    @property
    def floor(self) -> int:
        floor = self.prime_floor if self.prime_floor is not None else desk_prime_floor(self.k, self.F)
        return max(floor, self.k)

    @property
    def rounds(self) -> int:
        return math.ceil(math.log2(2 * self.F)) + 1

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(
            k=self.k,
            delta=self.delta,
            eta=self.eta,
            gamma=1e-3 / (self.k * math.log2(2 * self.F)),
            sample_constant=self.sample_constant,
            max_sweep=self.max_sweep,
            prune=self.prune,
            lp_method=self.lp_method,
        )

    def refit_samples(self) -> int:
        return int(math.ceil(self.refit_constant * self.k**2 / self.delta**2))


def pick_prime(cfg: TorusSfftConfig, rng: np.random.Generator) -> int:
    pool = primes_above(cfg.floor, cfg.prime_pool_size)
    if not pool:
        raise ValueError("prime pool is empty")
    return pool[int(rng.integers(len(pool)))]


def is_isolated(freqs, B: int) -> np.ndarray:
    """Per frequency: True when no other frequency is congruent to it mod B."""
    residues = np.mod(np.asarray(list(freqs), dtype=np.int64), B)
    _, inverse, counts = np.unique(residues, return_inverse=True, return_counts=True)
    return counts[inverse] == 1


def frequency_hash(oracle, B: int, delta: float, t0: float) -> tuple[MappedOracle, MappedOracle]:
    """Cyclic oracles z[i] = y(t0 + i/B) and z'[i] = y(t0 + delta + i/B) on Z_B."""

    def grid(shift):
        return lambda i: np.mod(shift + np.asarray(i, dtype=float) / B, 1.0)

    z = MappedOracle(oracle, grid(t0), "cyclic", True)
    z2 = MappedOracle(oracle, grid(t0 + delta), "cyclic", True)
    return z, z2


def hashed_spectrum(signal: TorusSpectrum, B: int, t0: float) -> dict[int, complex]:
    """Noiseless bucket spectrum: sum over xi = l (mod B) of f^(xi) e^{2 pi i xi t0}."""
    out: dict[int, complex] = {}
    for xi, coeff in signal.entries.items():
        bucket = xi % B
        out[bucket] = out.get(bucket, 0) + coeff * np.exp(2j * np.pi * xi * t0)
    return out


@dataclass
class PhaseState:
    apx: dict[int, int | None] = field(default_factory=dict)
    delta: float = 0.0
    round: int = 0

    def live(self) -> dict[int, int]:
        return {b: v for b, v in self.apx.items() if v is not None}


_PI_BELOW = np.nextafter(np.pi, 0.0)


def phase_update(state: PhaseState, bucket: int, c: complex, c_shift: complex,
                 delta: float) -> int | None:
    """Move Apx[bucket] by round(gamma / (2 pi delta)) where gamma is the
    principal phase of e^{-2 pi i delta Apx} c'/c. A zero coefficient nulls it."""
    current = state.apx.get(bucket, 0)
    if current is None:
        return None
    if c == 0 or c_shift == 0:
        state.apx[bucket] = None
        return None
    gamma = float(np.angle(np.exp(-2j * np.pi * delta * current) * c_shift / c))
    if abs(gamma) >= np.pi:
        gamma = _PI_BELOW
    step = int(np.floor(gamma / (2 * np.pi * delta) + 0.5))
    state.apx[bucket] = current + step
    return state.apx[bucket]


def torus_sfft(oracle, cfg: TorusSfftConfig) -> DecodeResult:
    """Recover a k-sparse torus spectrum with frequencies in [-F, F]."""
    B = pick_prime(cfg, derive_rng(cfg.seed, "torus-sfft", "prime"))
    inner = cfg.decode_config()
    chars = CyclicCharacters(B)
    state = PhaseState(delta=1.0 / (4 * cfg.F))
    queried: list[np.ndarray] = []
    rounds = []
    for r in range(cfg.rounds):
        rng = derive_rng(cfg.seed, "torus-sfft", "round", r)
        t0 = float(rng.random()) / B
        delta = state.delta
        z, z2 = frequency_hash(oracle, B, delta, t0)
        res = linear_decode(z, chars, inner, rng)
        res2 = linear_decode(z2, chars, inner, rng)
        queried.append(np.mod(t0 + res.points / B, 1.0))
        queried.append(np.mod(t0 + delta + res2.points / B, 1.0))
        s1, s2 = res.spectrum, res2.spectrum
        both = s1.support & s2.support
        if r == 0:
            state.apx = {b: 0 for b in sorted(both)}
        for bucket in list(state.apx):
            if bucket in both:
                phase_update(state, bucket, s1[bucket], s2[bucket], delta)
            else:
                state.apx[bucket] = None
        state.delta = 2 * delta
        state.round = r + 1
        rounds.append({"round": r, "delta": delta, "t0": t0, "m": res.m,
                       "support": sorted(s1.support), "support_shifted": sorted(s2.support),
                       "apx": dict(state.apx)})

    found = sorted({v for v in state.live().values() if -cfg.F <= v <= cfg.F})
    points = np.concatenate(queried) if queried else np.zeros(0)
    diagnostics = {
        "B": B,
        "rounds": rounds,
        "final_delta": state.delta,
        "apx": dict(state.apx),
        "frequencies": found,
        "hash_min_gap": min_circular_gap(points),
        "separation_target": 1.0 / (2 * B),
    }
    if not found:
        diagnostics["empty"] = "no bucket survived every round"
        return DecodeResult(TorusSpectrum(cfg.F, {}), m=0, delta_star=None,
                            diagnostics=diagnostics)

    rng = derive_rng(cfg.seed, "torus-sfft", "refit")
    m = max(cfg.refit_samples(), len(found))
    t = rng.random(m)
    y = oracle.query(t)
    final = TorusCharacters(cfg.F, found)
    fit = l1_regression(final.design(t), y, cfg.lp_method)
    if fit.status != "optimal":
        raise RuntimeError(f"final refit LP ended with status {fit.status}")
    coeffs = fit.coefficients.copy()
    if cfg.prune is not None:
        coeffs[np.abs(coeffs) < cfg.prune * cfg.eta] = 0
    return DecodeResult(
        spectrum=final.spectrum(coeffs),
        m=m,
        delta_star=None,
        support=tuple(found),
        coefficients=fit.coefficients,
        residual=fit.residual,
        points=t,
        observations=y,
        diagnostics=diagnostics,
    )


def induction_violations(result: DecodeResult, truth: TorusSpectrum) -> list[dict]:
    """Rounds where a live bucket's estimate left the bracket
    |xi - Apx| <= 1/(4 Delta), Delta being the step after that round's doubling."""
    B = result.diagnostics["B"]
    by_bucket: dict[int, list[int]] = {}
    for xi in truth.support:
        by_bucket.setdefault(xi % B, []).append(xi)
    out = []
    for row in result.diagnostics["rounds"]:
        radius = 1.0 / (4 * 2 * row["delta"])
        for bucket, apx in row["apx"].items():
            if apx is None or len(by_bucket.get(bucket, [])) != 1:
                continue
            xi = by_bucket[bucket][0]
            if abs(xi - apx) > radius:
                out.append({"round": row["round"], "bucket": bucket, "xi": xi, "apx": apx})
    return out
