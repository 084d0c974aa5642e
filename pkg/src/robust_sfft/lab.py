"""Monte Carlo checks of the concentration statements the decoders rely on.

Each check samples functions from a family, draws m uniform points, and
compares the empirical l1 (or l2) mass with its exact expectation. Exact
expectations come from full enumeration on the cube and from a fine grid on
the torus. Isolation rates of the two hashing schemes live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boolean_sfft import check_isolation
from .lowdeg import MonomialBasis
from .rng import derive_rng
from .spectral import TorusSpectrum, random_invertible_f2, walsh_hadamard
from .torus_sfft import TorusSfftConfig, is_isolated, primes_above

EXACT_MAX_N = 16
TORUS_GRID = 2**14
KINDS = ("k-sparse", "relaxed-F", "degree-d")
RELAXED_SHAPES = ("spread", "and", "sparse-2k", "character")


@dataclass
class FamilyMember:
    """One sampled function, with unit l2 spectrum.

    On the cube ``coeffs`` is the dense spectrum and ``table`` the dense value
    table; on the torus ``spectrum`` carries the function.
    """

    kind: str
    shape: str
    coeffs: np.ndarray | None = None
    table: np.ndarray | None = None
    spectrum: TorusSpectrum | None = None

    def values(self, points) -> np.ndarray:
        if self.table is not None:
            return self.table[np.asarray(points, dtype=np.int64)]
        return np.asarray(self.spectrum.evaluate(points))

    def spectral_norm(self, p: float) -> float:
        if self.coeffs is not None:
            return float(np.sum(np.abs(self.coeffs) ** p) ** (1 / p))
        return self.spectrum.norm(p)

    def max_abs(self) -> float:
        if self.table is not None:
            return float(np.abs(self.table).max())
        return float(np.abs(self.spectrum.evaluate(_torus_grid(self.spectrum.F))).max())

    def mean_abs(self) -> float:
        if self.table is not None:
            return float(np.abs(self.table).mean())
        return float(np.abs(self.spectrum.evaluate(_torus_grid(self.spectrum.F))).mean())

    def mean_square(self) -> float:
        # Parseval
        return self.spectral_norm(2) ** 2


def _torus_grid(F: int) -> np.ndarray:
    size = max(TORUS_GRID, 16 * (2 * F + 1))
    return np.arange(size) / size


def _boolean_member(kind: str, shape: str, coeffs: np.ndarray) -> FamilyMember:
    coeffs = coeffs / np.linalg.norm(coeffs)
    return FamilyMember(kind, shape, coeffs=coeffs, table=walsh_hadamard(coeffs))


@dataclass
class FamilySampler:
    """Draws unit-norm members of a function family.

    domain is "boolean" (parameter n) or "torus" (parameter F). Kinds:
    k-sparse, relaxed-F (the l1 <= 2 sqrt(k) l2 relaxation, cycling through
    spread vectors, AND functions, 2k-sparse and single characters) and
    degree-d (cube only).
    """

    kind: str
    domain: str = "boolean"
    n: int = 10
    F: int = 64
    k: int = 4
    d: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.domain not in ("boolean", "torus"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "boolean" and self.n > EXACT_MAX_N:
            raise ValueError(f"exact expectations need n <= {EXACT_MAX_N}")
        if self.kind == "degree-d" and self.domain != "boolean":
            raise ValueError("degree-d family lives on the cube")
        if self.k < 1:
            raise ValueError("k must be at least 1")

    @property
    def size(self) -> int:
        """Number of characters |T|."""
        return 2**self.n if self.domain == "boolean" else 2 * self.F + 1

    def sample_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.domain == "boolean":
            return rng.integers(0, 2**self.n, size=m, dtype=np.int64)
        return rng.random(m)

    def member(self, trial: int) -> FamilyMember:
        rng = derive_rng(self.seed, "family", self.kind, trial)
        if self.kind == "k-sparse":
            return self._sparse(rng, self.k, "k-sparse")
        if self.kind == "degree-d":
            basis = MonomialBasis(self.n, self.d)
            coeffs = np.zeros(2**self.n)
            coeffs[basis.freqs] = rng.standard_normal(len(basis))
            return _boolean_member(self.kind, "degree-d", coeffs)
        shape = RELAXED_SHAPES[trial % len(RELAXED_SHAPES)]
        if shape == "sparse-2k":
            return self._sparse(rng, min(2 * self.k, self.size), shape)
        if shape == "character":
            return self._sparse(rng, 1, shape)
        if shape == "spread":
            return self._spread(rng)
        return self._and(rng)

    def _sparse(self, rng, k: int, shape: str) -> FamilyMember:
        if self.domain == "boolean":
            coeffs = np.zeros(2**self.n)
            coeffs[rng.choice(2**self.n, size=k, replace=False)] = rng.standard_normal(k)
            return _boolean_member(self.kind, shape, coeffs)
        freqs = rng.choice(np.arange(-self.F, self.F + 1), size=k, replace=False)
        amps = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        amps /= np.linalg.norm(amps)
        return FamilyMember(self.kind, shape, spectrum=TorusSpectrum(self.F, dict(zip(freqs.tolist(), amps))))

    def _spread(self, rng) -> FamilyMember:
        """k heavy entries +-1/sqrt(k) and every other entry +-sqrt(k)/N."""
        N, k = self.size, min(self.k, self.size)
        mags = np.full(N, math.sqrt(k) / N)
        mags[rng.choice(N, size=k, replace=False)] = 1 / math.sqrt(k)
        signs = rng.choice([-1.0, 1.0], size=N)
        if self.domain == "boolean":
            return _boolean_member(self.kind, "spread", mags * signs)
        vals = mags * signs / np.linalg.norm(mags)
        spec = TorusSpectrum(self.F, dict(zip(range(-self.F, self.F + 1), vals)))
        return FamilyMember(self.kind, "spread", spectrum=spec)

    def _and(self, rng) -> FamilyMember:
        """AND of log2(2k) coordinates (on the torus, the matching Dirichlet-like block)."""
        r = max(1, math.ceil(math.log2(2 * self.k)))
        if self.domain == "boolean":
            r = min(r, self.n)
            coords = rng.choice(self.n, size=r, replace=False)
            mask = sum(1 << int(c) for c in coords)
            table = ((np.arange(2**self.n) & mask) == mask).astype(float)
            coeffs = walsh_hadamard(table) / 2**self.n
            return _boolean_member(self.kind, "and", coeffs)
        width = min(2**r, self.size)
        start = int(rng.integers(-self.F, self.F - width + 2))
        vals = np.full(width, 1 / math.sqrt(width))
        spec = TorusSpectrum(self.F, dict(zip(range(start, start + width), vals)))
        return FamilyMember(self.kind, "and", spectrum=spec)


# -- family membership ----------------------------------------------------------------


@dataclass
class Membership:
    l1: float  # ||h^||_1 after normalizing ||h^||_2 = 1
    max_abs: float
    mean_abs: float
    bound: float  # 2 sqrt(k)

    @property
    def l1_ok(self) -> bool:
        return self.l1 <= self.bound * (1 + 1e-9)

    @property
    def max_ok(self) -> bool:
        return self.max_abs <= self.bound * (1 + 1e-9)

    @property
    def mean_ok(self) -> bool:
        return self.mean_abs >= (1 - 1e-9) / self.bound

    @property
    def member(self) -> bool:
        return self.l1_ok and self.max_ok and self.mean_ok

    @property
    def ratios(self) -> tuple[float, float, float]:
        return self.l1, self.max_abs, self.mean_abs


def family_f_membership(h: FamilyMember, k: int) -> Membership:
    """Check ||h^||_1 <= 2 sqrt(k), max|h| <= 2 sqrt(k) and E|h| >= 1/(2 sqrt(k))
    for h scaled to unit l2 spectrum."""
    norm = h.spectral_norm(2)
    if norm == 0:
        raise ValueError("h is identically zero")
    return Membership(
        l1=h.spectral_norm(1) / norm,
        max_abs=h.max_abs() / norm,
        mean_abs=h.mean_abs() / norm,
        bound=2 * math.sqrt(k),
    )


# -- deviation reports -------------------------------------------------------------


@dataclass
class DeviationReport:
    claim: str
    m: int
    trials: int
    deviations: np.ndarray = field(repr=False)
    skipped: int = 0

    @property
    def p50(self) -> float:
        return float(np.percentile(self.deviations, 50)) if self.deviations.size else 0.0

    @property
    def p95(self) -> float:
        return float(np.percentile(self.deviations, 95)) if self.deviations.size else 0.0

    @property
    def max(self) -> float:
        return float(self.deviations.max()) if self.deviations.size else 0.0

    @property
    def mean(self) -> float:
        return float(self.deviations.mean()) if self.deviations.size else 0.0

    @property
    def stderr(self) -> float:
        if self.deviations.size < 2:
            return 0.0
        return float(self.deviations.std(ddof=1) / math.sqrt(self.deviations.size))

    def row(self, threshold: float | None = None) -> dict:
        out = {"claim": self.claim, "m": self.m, "trials": self.trials,
               "p50": self.p50, "p95": self.p95, "max": self.max}
        if threshold is not None:
            out["pass"] = self.p95 <= threshold
        return out


def _deviation(sampler: FamilySampler, m: int, trials: int, power: int, claim: str,
               seed: int) -> DeviationReport:
    devs, skipped = [], 0
    for trial in range(trials):
        h = sampler.member(trial)
        expected = h.mean_abs() if power == 1 else h.mean_square()
        if expected == 0:
            skipped += 1
            continue
        rng = derive_rng(seed, "deviation", claim, m, trial)
        vals = np.abs(h.values(sampler.sample_points(rng, m))) ** power
        devs.append(abs(vals.sum() - m * expected) / (m * expected))
    return DeviationReport(claim, m, trials, np.array(devs), skipped)


def ell1_deviation(sampler: FamilySampler, m: int, trials: int, seed: int = 0) -> DeviationReport:
    """Relative deviation |sum|h(x_i)| - m E|h|| / (m E|h|), one fresh h per trial."""
    return _deviation(sampler, m, trials, 1, "ell1", seed)


def ell2_deviation(sampler: FamilySampler, m: int, trials: int, seed: int = 0) -> DeviationReport:
    """The same with squares, against m E|h|^2 = m ||h^||_2^2."""
    return _deviation(sampler, m, trials, 2, "ell2", seed)


def pilot_sample_size(k: int, num_chars: int, constant: float = 8.0) -> int:
    """m = C k^2 log|T|."""
    return int(math.ceil(constant * k**2 * math.log(num_chars)))


@dataclass
class MonotoneCheck:
    m: int
    mean_small: float
    mean_large: float
    stderr: float

    @property
    def passed(self) -> bool:
        """Doubling m may not raise the mean deviation by more than 3 sigma."""
        return self.mean_large <= self.mean_small + 3 * self.stderr


def monotone_in_m(sampler: FamilySampler, m: int, trials: int = 50, seed: int = 0,
                  claim: str = "ell1") -> MonotoneCheck:
    fn = ell1_deviation if claim == "ell1" else ell2_deviation
    small = fn(sampler, m, trials, seed)
    large = fn(sampler, 2 * m, trials, seed)
    se = math.hypot(small.stderr, large.stderr)
    return MonotoneCheck(m, small.mean, large.mean, se)


def gram_extremes(n: int, d: int, m: int, rng: np.random.Generator) -> tuple[float, float]:
    """Smallest and largest eigenvalue of Phi^T Phi / m for the degree-<=d
    character design on m uniform points; the l2 statement asks both to be 1 +- eps."""
    basis = MonomialBasis(n, d)
    phi = basis.design(rng.integers(0, 2**n, size=m, dtype=np.int64))
    eig = np.linalg.eigvalsh(phi.T @ phi / m)
    return float(eig[0]), float(eig[-1])


# -- isolation ---------------------------------------------------------------------


@dataclass
class IsolationReport:
    domain: str
    k: int
    trials: int
    isolated: int

    @property
    def rate(self) -> float:
        return self.isolated / self.trials if self.trials else 1.0


def isolation_rate(domain: str, k: int, trials: int, seed: int = 0, n: int = 10,
                   ell: int | None = None, F: int = 64, prime_floor: int | None = None,
                   prime_pool_size: int = 1000) -> IsolationReport:
    """Fraction of trials in which all k random frequencies land in distinct buckets.

    boolean: A is a fresh random invertible matrix and buckets are the first
    ell coordinates of A^T xi. torus: B is drawn from the prime pool and
    buckets are xi mod B.
    """
    if domain == "boolean":
        ell = ell if ell is not None else min(2 * math.ceil(math.log2(max(k, 1))) + 10, n)
        if k > 2**n:
            raise ValueError("k exceeds the number of characters")
    elif domain == "torus":
        cfg = TorusSfftConfig(F=F, k=k, delta=0.5, eta=1.0, prime_floor=prime_floor,
                              prime_pool_size=prime_pool_size)
        pool = primes_above(cfg.floor, cfg.prime_pool_size)
        if k > 2 * F + 1:
            raise ValueError("k exceeds the number of characters")
    else:
        raise ValueError(f"unknown domain {domain!r}")
    isolated = 0
    for trial in range(trials):
        rng = derive_rng(seed, "isolation", domain, trial)
        if domain == "boolean":
            freqs = rng.choice(2**n, size=k, replace=False)
            A = random_invertible_f2(n, rng)
            ok = check_isolation(A, freqs.tolist(), ell)
        else:
            freqs = rng.choice(np.arange(-F, F + 1), size=k, replace=False)
            ok = is_isolated(freqs.tolist(), pool[int(rng.integers(len(pool)))])
        isolated += bool(np.all(ok))
    return IsolationReport(domain, k, trials, isolated)
