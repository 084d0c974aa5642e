"""LP decoding over a known character set: noise-budget sweep, top-k, l1 refit."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import BudgetSweep, l1_regression, surrogate_abs
from .spectral import BooleanSpectrum, CyclicSpectrum, TorusSpectrum, chi

log = logging.getLogger(__name__)

BRUTEFORCE_LIMIT = 100_000
MAX_GRID = 1_000_000  # budget grid points, skipped ones included


# -- character sets -------------------------------------------------------------------


class BooleanCharacters:
    """Characters (-1)^<xi,x> on {0,1}^n for a fixed list of frequencies."""

    domain = "boolean"
    is_complex = False

    def __init__(self, n: int, freqs=None):
        self.n = n
        if freqs is None:
            freqs = np.arange(2**n)
        self.freqs = np.unique(np.asarray(list(freqs), dtype=np.int64))

    def __len__(self):
        return self.freqs.size

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, 2**self.n, size=m, dtype=np.int64)

    def design(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64)
        return chi(self.freqs[None, :], pts[:, None]) if pts.size else np.zeros((0, len(self)))

    def spectrum(self, coeffs) -> BooleanSpectrum:
        return BooleanSpectrum(self.n, dict(zip(self.freqs.tolist(), np.real(coeffs))))


class CyclicCharacters:
    """Characters e^{2 pi i l x / B} on Z_B."""

    domain = "cyclic"
    is_complex = True

    def __init__(self, B: int, freqs=None):
        self.B = B
        if freqs is None:
            freqs = np.arange(B)
        self.freqs = np.unique(np.asarray(list(freqs), dtype=np.int64) % B)

    def __len__(self):
        return self.freqs.size

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, self.B, size=m, dtype=np.int64)

    def design(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64)
        phase = (self.freqs[None, :] * pts[:, None]) % self.B
        return np.exp(2j * np.pi * phase / self.B)

    def spectrum(self, coeffs) -> CyclicSpectrum:
        return CyclicSpectrum(self.B, dict(zip(self.freqs.tolist(), coeffs)))


class TorusCharacters:
    """Characters e^{2 pi i xi t} on [0, 1) for integer frequencies in [-F, F]."""

    domain = "torus"
    is_complex = True

    def __init__(self, F: int, freqs=None):
        self.F = F
        if freqs is None:
            freqs = np.arange(-F, F + 1)
        self.freqs = np.unique(np.asarray(list(freqs), dtype=np.int64))

    def __len__(self):
        return self.freqs.size

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.random(m)

    def design(self, points) -> np.ndarray:
        t = np.asarray(points, dtype=float)
        return np.exp(2j * np.pi * self.freqs[None, :] * t[:, None])

    def spectrum(self, coeffs) -> TorusSpectrum:
        return TorusSpectrum(self.F, dict(zip(self.freqs.tolist(), coeffs)))


# -- configuration and results ------------------------------------------------------


@dataclass
class DecodeConfig:
    k: int
    delta: float
    eta: float
    gamma: float = 1e-2
    sample_constant: float = 8.0
    sigma: float | None = None  # None: m * eta * delta / 100
    max_sweep: int | None = None  # cap on sweep points; coarsens sigma when hit
    prune: float | None = 0.5  # drop output coefficients below prune * eta
    lp_method: str = "highs"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.max_sweep is not None and self.max_sweep < 2:
            raise ValueError("max_sweep must be at least 2")

    def num_samples(self, num_chars: int) -> int:
        log_t = math.log(max(num_chars, 2))
        m = self.sample_constant * self.k**2 * log_t * math.log(1 / self.gamma) / self.delta**2
        return max(int(math.ceil(m)), self.k + 1)


@dataclass
class DecodeResult:
    spectrum: object
    m: int
    delta_star: float | None
    support: tuple = ()
    coefficients: np.ndarray | None = None
    residual: float | None = None
    points: np.ndarray | None = None
    observations: np.ndarray | None = None
    sweep: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def sweep_table(self) -> list[dict]:
        return [dict(row) for row in self.sweep]


class DecodeError(RuntimeError):
    pass


def top_k(coeffs, k: int) -> np.ndarray:
    """Indices of the k largest |coefficients|; ties go to the lower index."""
    mag = np.abs(np.asarray(coeffs))
    order = np.lexsort((np.arange(mag.size), -mag))
    return np.sort(order[:k])


def clamp_observations(y, eta: float, k: int) -> np.ndarray:
    y = np.asarray(y)
    bound = 1e6 * (1 + eta * k)
    mag = np.abs(y)
    if np.any(mag > bound):
        log.warning("clamping %d observations to magnitude %.3g", int((mag > bound).sum()), bound)
        y = np.where(mag > bound, y / np.where(mag > 0, mag, 1.0) * bound, y)
    return y


def linear_decode(oracle, chars, cfg: DecodeConfig, rng: np.random.Generator,
                  m: int | None = None) -> DecodeResult:
    """Sweep the noise budget, solve the l1 program per budget, keep the top-k
    characters, refit by l1 regression and return the refit with the smallest
    residual (ties to the smaller budget)."""
    if len(chars) < cfg.k:
        raise ValueError(f"character set has {len(chars)} < k={cfg.k} elements")
    m = cfg.num_samples(len(chars)) if m is None else m
    points = chars.sample(rng, m)
    y = clamp_observations(oracle.query(points), cfg.eta, cfg.k)
    if not chars.is_complex:
        y = np.real(y).astype(float)
    design = chars.design(points)

    total = float(surrogate_abs(y).sum())
    top = total + cfg.eta * m

    # budgets below the smallest achievable residual are infeasible; when there
    # are more samples than characters that residual is one regression away
    floor = 0.0
    if m > len(chars):
        full = l1_regression(design, y, cfg.lp_method)
        if full.status == "optimal":
            floor = full.residual * (1 - 1e-9)

    sigma = cfg.sigma if cfg.sigma is not None else m * cfg.eta * cfg.delta / 100
    if cfg.max_sweep is not None:
        # only budgets in [floor, total) need an LP; coarsen until they fit the cap
        span = max(total - floor, 0.0)
        if span / sigma + 1 > cfg.max_sweep:
            sigma = span / (cfg.max_sweep - 1) if span > 0 else top
    sigma = max(sigma, top / MAX_GRID)
    budgets = sigma * np.arange(int(math.floor(top / sigma + 1e-9)) + 1)

    refits: dict[tuple, tuple] = {}
    rows: dict[int, dict] = {}
    solver = BudgetSweep(design, y, cfg.lp_method)
    zero = np.zeros(len(chars), dtype=complex if chars.is_complex else float)
    # decreasing budgets: feasibility is monotone and warm starts stay cheap
    for j in range(len(budgets) - 1, -1, -1):
        budget = budgets[j]
        row = {"budget": float(budget)}
        rows[j] = row
        if budget < floor:
            row.update(status="infeasible", objective=None, support=None, residual=None)
            continue
        if budget >= total:
            # g = 0 is feasible and the objective is non-negative
            fit_coeffs, objective, status = zero, 0.0, "optimal"
        else:
            fit = solver.solve(float(budget))
            fit_coeffs, objective, status = fit.coefficients, fit.objective, fit.status
        row["status"] = status
        if status != "optimal":
            log.debug("budget %.4g skipped: LP %s", budget, status)
            row.update(objective=None, support=None, residual=None)
            continue
        support = tuple(top_k(fit_coeffs, cfg.k).tolist())
        if support not in refits:
            reg = l1_regression(design[:, list(support)], y, cfg.lp_method)
            if reg.status != "optimal":
                raise DecodeError(f"refit LP ended with status {reg.status}")
            refits[support] = (reg.coefficients, reg.residual)
        row.update(objective=float(objective), support=support, residual=float(refits[support][1]))

    sweep = [rows[j] for j in range(len(budgets))]
    best = None
    for row in sweep:
        if row["residual"] is not None and (best is None or row["residual"] < best[2]):
            best = (row["budget"], row["support"], row["residual"], refits[row["support"]][0])
    if best is None:
        raise DecodeError("every noise budget in the sweep failed")

    budget, support, residual, coeffs = best
    full = np.zeros(len(chars), dtype=coeffs.dtype)
    full[list(support)] = coeffs
    if cfg.prune is not None:
        full[np.abs(full) < cfg.prune * cfg.eta] = 0
    return DecodeResult(
        spectrum=chars.spectrum(full),
        m=m,
        delta_star=budget,
        support=tuple(int(chars.freqs[j]) for j in support),
        coefficients=coeffs,
        residual=residual,
        points=points,
        observations=y,
        sweep=sweep,
        diagnostics={"sigma": sigma, "sweep_top": top, "num_budgets": len(budgets),
                     "residual_floor": floor},
    )


def k_sparse_bruteforce(points, observations, chars, k: int, method: str = "highs",
                        limit: int = BRUTEFORCE_LIMIT) -> DecodeResult:
    """Exhaustive search over all size-k supports for the smallest l1 residual."""
    count = math.comb(len(chars), k)
    if count > limit:
        raise ValueError(f"{count} supports exceed the enumeration limit {limit}")
    y = np.asarray(observations)
    if not chars.is_complex:
        y = np.real(y).astype(float)
    design = chars.design(points)
    best = None
    for support in itertools.combinations(range(len(chars)), k):
        reg = l1_regression(design[:, list(support)], y, method)
        if reg.status != "optimal":
            continue
        if best is None or reg.residual < best[1] - 1e-12:
            best = (support, reg.residual, reg.coefficients)
    if best is None:
        raise DecodeError("no support admitted an optimal fit")
    support, residual, coeffs = best
    full = np.zeros(len(chars), dtype=coeffs.dtype)
    full[list(support)] = coeffs
    return DecodeResult(
        spectrum=chars.spectrum(full),
        m=len(y),
        delta_star=None,
        support=tuple(int(chars.freqs[j]) for j in support),
        coefficients=coeffs,
        residual=residual,
        points=np.asarray(points),
        observations=y,
    )
