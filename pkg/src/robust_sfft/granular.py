"""Granular torus recovery under adversarial outliers, and the anti-concentration
tools behind it.

The decoder enumerates every k-sparse spectrum whose amplitudes lie on the
lattice eta * Z[i] inside the unit l2 ball and outputs the first one that
stays within epsilon of more than half of the samples. Distinct candidates
differ by a polynomial whose lowest coefficient is at least eta, and Jensen's
formula keeps such a polynomial away from zero on most of the circle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import derive_rng
from .spectral import TorusSpectrum

CARDINALITY_GUARD = 10_000_000
MIN_PROBE_GRID = 1000
COUNTEREXAMPLE_MAX_K = 60


# -- the candidate family ---------------------------------------------------------


def _norm_budget(eta: float) -> int:
    """Largest integer a^2 + b^2 with eta^2 (a^2 + b^2) <= 1."""
    return int(math.floor(1.0 / eta**2 + 1e-9))


def granular_amplitudes(eta: float) -> list[complex]:
    """Nonzero points of eta * Z[i] in the closed unit disc, sorted by (re, im)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    budget = _norm_budget(eta)
    r = int(math.isqrt(budget)) if budget > 0 else 0
    out = [
        (a, b)
        for a in range(-r, r + 1)
        for b in range(-r, r + 1)
        if 0 < a * a + b * b <= budget
    ]
    return [complex(a * eta, b * eta) for a, b in sorted(out)]


def _amplitude_tuple_count(eta: float, k: int) -> int:
    """Number of k-tuples of nonzero lattice amplitudes with sum |v|^2 <= 1."""
    budget = _norm_budget(eta)
    per_norm = np.zeros(budget + 1, dtype=object)
    r = int(math.isqrt(budget)) if budget > 0 else 0
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            s = a * a + b * b
            if 0 < s <= budget:
                per_norm[s] += 1
    ways = np.zeros(budget + 1, dtype=object)
    ways[0] = 1
    for _ in range(k):
        nxt = np.zeros(budget + 1, dtype=object)
        for s, count in enumerate(ways):
            if count:
                for t in range(1, budget + 1 - s):
                    if per_norm[t]:
                        nxt[s + t] += count * per_norm[t]
        ways = nxt
    return int(sum(ways))


def granular_cardinality(F: int, k: int, eta: float) -> int:
    """Exact size of the candidate family."""
    return math.comb(2 * F + 1, k) * _amplitude_tuple_count(eta, k)


def granular_cardinality_bound(F: int, k: int, eta: float) -> int:
    """C(2F+1, k) * (2 floor(1/eta) + 1)^(2k)."""
    return math.comb(2 * F + 1, k) * (2 * int(math.floor(1 / eta + 1e-9)) + 1) ** (2 * k)


def _amplitude_tuples(eta: float, k: int) -> np.ndarray:
    amps = granular_amplitudes(eta)
    if not amps:
        return np.zeros((0, k), dtype=complex)
    rows = [
        combo
        for combo in itertools.product(amps, repeat=k)
        if sum(abs(v) ** 2 for v in combo) <= 1 + 1e-12
    ]
    return np.array(rows, dtype=complex).reshape(-1, k)


@dataclass
class GranularGrid:
    F: int
    k: int
    eta: float
    guard: int = CARDINALITY_GUARD

    def __post_init__(self):
        if self.F < 0 or self.k < 1:
            raise ValueError("need F >= 0 and k >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    def cardinality(self) -> int:
        return granular_cardinality(self.F, self.k, self.eta)

    def check_guard(self) -> int:
        count = self.cardinality()
        if count > self.guard:
            raise ValueError(f"{count} granular candidates exceed the guard {self.guard}")
        return count

    def blocks(self):
        """(frequency tuple, amplitude matrix) pairs in enumeration order."""
        self.check_guard()
        amps = _amplitude_tuples(self.eta, self.k)
        if amps.shape[0] == 0:
            return
        for freqs in itertools.combinations(range(-self.F, self.F + 1), self.k):
            yield freqs, amps

    def __iter__(self):
        for freqs, amps in self.blocks():
            for row in amps:
                yield TorusSpectrum(self.F, dict(zip(freqs, row.tolist())))


def enumerate_granular(F: int, k: int, eta: float, guard: int = CARDINALITY_GUARD):
    """Every admissible candidate exactly once: frequency sets ascending, then
    amplitude tuples lexicographic in (re, im)."""
    return iter(GranularGrid(F, k, eta, guard))


# -- decoder ------------------------------------------------------------------------


@dataclass
class GranularConfig:
    F: int
    k: int
    eta: float
    delta: float
    epsilon: float = 1e-4
    sample_constant: float = 2.0
    separation_grid: int | None = 1024  # None skips the pre-flight probe
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def num_samples(self) -> int:
        m = self.sample_constant * self.k * math.log(max(self.F / self.eta, 2)) / self.delta**2
        return int(math.ceil(m))

    @property
    def acceptance(self) -> float:
        return 0.5 - self.delta / 2


@dataclass
class GranularResult:
    spectrum: TorusSpectrum | None
    m: int
    mismatches: int | None
    candidates_checked: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.spectrum is not None


class NoCandidateAccepted(RuntimeError):
    pass


def _characters(freqs, t) -> np.ndarray:
    return np.exp(2j * np.pi * np.outer(np.asarray(t, float), np.asarray(freqs, float)))


def granular_decode(oracle, cfg: GranularConfig, strict: bool = True) -> GranularResult:
    """Return the first enumerated candidate that misses fewer than
    (0.5 - delta/2) m samples by epsilon or more."""
    grid = GranularGrid(cfg.F, cfg.k, cfg.eta)
    grid.check_guard()
    m = cfg.num_samples()
    t = derive_rng(cfg.seed, "granular", "samples").random(m)
    y = np.asarray(oracle.query(t), dtype=complex)
    limit = cfg.acceptance * m
    checked = 0
    for freqs, amps in grid.blocks():
        values = amps @ _characters(freqs, t).T
        misses = (np.abs(values - y[None, :]) >= cfg.epsilon).sum(axis=1)
        hits = np.nonzero(misses < limit)[0]
        if hits.size:
            j = int(hits[0])
            checked += j + 1
            spec = TorusSpectrum(cfg.F, dict(zip(freqs, amps[j].tolist())))
            diagnostics = {"threshold": limit, "epsilon": cfg.epsilon}
            if cfg.separation_grid:
                diagnostics["separation"] = separation_probe(
                    spec, grid, 2 * cfg.epsilon, cfg.separation_grid
                )
                diagnostics["separation_target"] = cfg.delta / 4
            return GranularResult(spec, m, int(misses[j]), checked, diagnostics)
        checked += amps.shape[0]
    if strict:
        raise NoCandidateAccepted(
            f"none of {checked} candidates fit more than half of the {m} samples"
        )
    return GranularResult(None, m, None, checked, {"threshold": limit})


def separation_probe(f: TorusSpectrum, grid: GranularGrid, radius: float,
                     grid_size: int = 1024) -> float:
    """max over candidates g != f of the grid fraction with |g - f| <= radius."""
    t = (np.arange(grid_size) + 0.5) / grid_size
    fv = np.asarray(f.evaluate(t))
    target = {xi: complex(v) for xi, v in f.entries.items() if v != 0}
    worst = 0.0
    for freqs, amps in grid.blocks():
        values = amps @ _characters(freqs, t).T
        close = (np.abs(values - fv[None, :]) <= radius).mean(axis=1)
        if set(freqs) == set(target):
            same = np.all(np.isclose(amps, [target[x] for x in freqs], atol=1e-12), axis=1)
            close = np.where(same, 0.0, close)
        worst = max(worst, float(close.max()))
    return worst


# -- anti-concentration -------------------------------------------------------------


def c_alpha(alpha: float) -> float:
    """C_alpha = (1 / (1 - alpha))^((1 - alpha) / 2)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return (1 / (1 - alpha)) ** ((1 - alpha) / 2)


def anticoncentration_threshold(eta: float, alpha: float) -> float:
    """delta = (eta / C_alpha)^(1 / alpha)."""
    return (eta / c_alpha(alpha)) ** (1 / alpha)


def anticoncentration_probe(spec: TorusSpectrum, tau: float, grid_size: int = 4096) -> float:
    """Fraction of the uniform grid {j / grid_size} where |f(t)| <= tau."""
    if grid_size < MIN_PROBE_GRID:
        raise ValueError(f"grid_size must be at least {MIN_PROBE_GRID}")
    t = np.arange(grid_size) / grid_size
    return float((np.abs(np.asarray(spec.evaluate(t))) <= tau).mean())


@dataclass
class JensenCheck:
    lhs: float  # log |P(0)|
    rhs: float  # mean of log |P| on the circle
    slack: float


def jensen_check(spec: TorusSpectrum, nodes: int = 2**14) -> JensenCheck:
    """Compare log|P(0)| with the trapezoidal mean of log|P(e^{i theta})| for
    P(z) = sum_j v_j z^(xi_j - xi_1). Nodes sit at half-steps so a root at
    z = 1 or z = -1 is never sampled."""
    entries = sorted((xi, complex(v)) for xi, v in spec.entries.items() if v != 0)
    if not entries:
        raise ValueError("P is identically zero")
    lowest = entries[0][0]
    v0 = entries[0][1]
    theta = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
    z = np.exp(1j * theta)
    values = sum(v * z ** (xi - lowest) for xi, v in entries)
    lhs = math.log(abs(v0))
    rhs = float(np.mean(np.log(np.abs(values))))
    return JensenCheck(lhs, rhs, rhs - lhs)


def counterexample_signal(k: int) -> TorusSpectrum:
    """(1 + e^{2 pi i t})^k scaled to unit l2 norm: C(k, j) / sqrt(C(2k, k)) at j = 0..k."""
    if not 1 <= k <= COUNTEREXAMPLE_MAX_K:
        raise ValueError(f"k must lie in [1, {COUNTEREXAMPLE_MAX_K}]")
    scale = math.sqrt(float(math.comb(2 * k, k)))
    coeffs = {j: complex(math.comb(k, j) / scale) for j in range(k + 1)}
    return TorusSpectrum(k, coeffs)


def counterexample_threshold(k: int, alpha: float = 0.5) -> float:
    """sup of sqrt(2) k^(1/4) |cos(pi t)|^k over the length-alpha interval
    centred at t = 1/2, i.e. sqrt(2) k^(1/4) sin(pi alpha / 2)^k. The normalized
    counterexample is at most this on that interval, so the probe there is at
    least alpha."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(2) * k**0.25 * math.sin(math.pi * alpha / 2) ** k


def counterexample_envelope(k: int, t) -> np.ndarray:
    """The pointwise bound sqrt(2) k^(1/4) |cos(pi t)|^k on the normalized signal."""
    return math.sqrt(2) * k**0.25 * np.abs(np.cos(np.pi * np.asarray(t, float))) ** k


def random_sparse_unit(k: int, F: int, rng: np.random.Generator) -> TorusSpectrum:
    """k distinct frequencies in [-F, F] with complex Gaussian amplitudes, unit l2 norm."""
    freqs = rng.choice(np.arange(-F, F + 1), size=k, replace=False)
    amps = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    amps /= np.linalg.norm(amps)
    return TorusSpectrum(F, dict(zip(sorted(freqs.tolist()), amps)))


def lowest_magnitude(spec: TorusSpectrum) -> float:
    """|v_1|, the magnitude at the lowest frequency."""
    return abs(spec.entries[min(spec.entries)])
