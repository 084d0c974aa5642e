"""Query oracles with (rho, epsilon) outlier noise.

Random model: every query independently becomes an outlier with probability
rho (repeat queries of one point are re-randomised). Adversarial model: a fixed
seeded predicate marks at most a rho fraction of the domain, and every query
of a marked point returns the outlier value.
"""

from __future__ import annotations

import threading
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .rng import derive_rng, hash_uniform
from .spectral import BooleanSpectrum, CyclicSpectrum, TorusSpectrum

TORUS_RESOLUTION_BITS = 40
_EXACT_ADVERSARY_MAX_N = 22

MODELS = ("random", "adversarial")
INLIER_STRATEGIES = ("uniform", "worst-sign")


@dataclass(frozen=True)
class NoiseParams:
    rho: float = 0.0
    epsilon: float = 0.0
    model: str = "random"
    inlier_strategy: str = "uniform"
    outlier_strategy: str = "large-constant"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.model not in MODELS:
            raise ValueError(f"unknown noise model {self.model!r}")
        if self.inlier_strategy not in INLIER_STRATEGIES:
            raise ValueError(f"unknown inlier strategy {self.inlier_strategy!r}")
        if self.outlier_strategy not in OUTLIER_STRATEGIES:
            raise ValueError(f"unknown outlier strategy {self.outlier_strategy!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OracleStats:
    query_count: int = 0
    outlier_count: int = 0
    min_separation: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _large_constant(signal, points, decoy):
    return np.full(np.shape(points), 10.0 * signal.norm(1))


def _zero(signal, points, decoy):
    return np.zeros(np.shape(points))


def _decoy(signal, points, decoy):
    if decoy is None:
        raise ValueError("decoy strategy needs a decoy signal")
    return np.asarray(decoy.evaluate(points))


OUTLIER_STRATEGIES: dict[str, Callable] = {
    "large-constant": _large_constant,
    "zero": _zero,
    "decoy": _decoy,
}


def outlier_strategies() -> dict[str, Callable]:
    """Catalog of outlier value generators, keyed by name."""
    return dict(OUTLIER_STRATEGIES)


def outlier_values(name: str, signal, points, decoy=None) -> np.ndarray:
    try:
        strategy = OUTLIER_STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown outlier strategy {name!r}") from None
    return strategy(signal, points, decoy)


def min_circular_gap(points) -> float:
    """Smallest pairwise distance between points on R/Z."""
    t = np.sort(np.mod(np.asarray(points, dtype=float).ravel(), 1.0))
    if t.size < 2:
        return float("inf")
    gaps = np.diff(t)
    return float(min(gaps.min(), 1.0 - t[-1] + t[0]))


class NoisyOracle:
    """Query access to a ground-truth spectrum through a noise model."""

    def __init__(self, signal, params: NoiseParams, decoy=None):
        if isinstance(signal, BooleanSpectrum):
            self.domain = "boolean"
        elif isinstance(signal, TorusSpectrum):
            self.domain = "torus"
        elif isinstance(signal, CyclicSpectrum):
            self.domain = "cyclic"
        else:
            raise TypeError(f"unsupported signal type {type(signal).__name__}")
        if params.outlier_strategy == "decoy" and decoy is None:
            raise ValueError("decoy strategy needs a decoy signal")
        self.signal = signal
        self.params = params
        self.decoy = decoy
        self.is_complex = self.domain != "boolean"
        self._rng = derive_rng(params.seed, "oracle")
        self._lock = threading.Lock()
        self._queries = 0
        self._outliers = 0
        self._torus_points: list[np.ndarray] = []
        self._inlier_log: list[np.ndarray] = []
        self._marked: np.ndarray | None = None
        self.keep_inlier_log = False

    # -- adversarial predicate --------------------------------------------------

    def _boolean_marks(self) -> np.ndarray:
        n = self.signal.n
        size = 2**n
        budget = int(np.floor(self.params.rho * size))
        order = np.argsort(hash_uniform(np.arange(size), self.params.seed), kind="stable")
        marks = np.zeros(size, dtype=bool)
        marks[order[:budget]] = True
        return marks

    def corrupted(self, points) -> np.ndarray:
        """Adversarial corruption predicate (fixed per point)."""
        pts = np.asarray(points)
        rho, seed = self.params.rho, self.params.seed
        if self.domain == "boolean":
            if self.signal.n <= _EXACT_ADVERSARY_MAX_N:
                if self._marked is None:
                    self._marked = self._boolean_marks()
                return self._marked[pts.astype(np.int64)]
            return hash_uniform(pts.astype(np.int64), seed) < rho
        if self.domain == "torus":
            keys = np.floor(np.mod(pts, 1.0) * 2.0**TORUS_RESOLUTION_BITS).astype(np.int64)
            return hash_uniform(keys, seed) < rho
        return hash_uniform(np.mod(pts, self.signal.B).astype(np.int64), seed) < rho

    # -- queries --------------------------------------------------------------

    def _inlier_error(self, truth: np.ndarray) -> np.ndarray:
        eps = self.params.epsilon
        shape = truth.shape
        if eps == 0:
            return np.zeros(shape, dtype=truth.dtype)
        if self.params.inlier_strategy == "worst-sign":
            if self.is_complex:
                mag = np.abs(truth)
                unit = np.where(mag > 0, truth / np.where(mag > 0, mag, 1.0), 1.0)
                return -eps * unit
            return -eps * np.where(truth >= 0, 1.0, -1.0)
        if self.is_complex:
            radius = eps * self._rng.random(shape)
            angle = 2 * np.pi * self._rng.random(shape)
            return radius * np.exp(1j * angle)
        return self._rng.uniform(-eps, eps, size=shape)

    def query(self, points) -> np.ndarray:
        pts = np.asarray(points)
        truth = np.asarray(self.signal.evaluate(pts))
        if not self.is_complex:
            truth = truth.real.astype(float)
        with self._lock:
            if self.params.model == "random":
                mask = self._rng.random(pts.shape) < self.params.rho
            else:
                mask = self.corrupted(pts)
            values = truth + self._inlier_error(truth)
            if mask.any():
                bad = outlier_values(
                    self.params.outlier_strategy, self.signal, pts[mask], self.decoy
                )
                values = values.astype(np.result_type(values, bad))
                values[mask] = bad
            self._queries += int(pts.size)
            self._outliers += int(mask.sum())
            if self.domain == "torus":
                self._torus_points.append(np.mod(pts.astype(float).ravel(), 1.0))
            if self.keep_inlier_log:
                self._inlier_log.append(np.abs(values[~mask] - truth[~mask]))
        return values

    def __call__(self, x):
        out = self.query(np.asarray([x]))
        return out[0]

    def inlier_errors(self) -> np.ndarray:
        if not self._inlier_log:
            return np.zeros(0)
        return np.concatenate(self._inlier_log)

    def torus_points(self) -> np.ndarray:
        if not self._torus_points:
            return np.zeros(0)
        return np.concatenate(self._torus_points)

    @property
    def stats(self) -> OracleStats:
        sep = None
        if self.domain == "torus":
            sep = min_circular_gap(self.torus_points()) if self._queries > 1 else None
        return OracleStats(self._queries, self._outliers, sep)


@dataclass
class MappedOracle:
    """An oracle on a derived domain: each point is mapped, then the parent is queried."""

    parent: object
    mapper: Callable
    domain: str
    is_complex: bool
    scale: float = 1.0

    def query(self, points) -> np.ndarray:
        values = self.parent.query(self.mapper(np.asarray(points)))
        return values * self.scale if self.scale != 1.0 else values

    def __call__(self, x):
        return self.query(np.asarray([x]))[0]
