"""Explicitly derived random streams; nothing here touches global RNG state."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part) & 0xFFFFFFFFFFFFFFFF


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for the stream named by (seed, *keys)."""
    return np.random.default_rng(np.random.SeedSequence([_key(seed), *map(_key, keys)]))


def child_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def splitmix64(values, seed: int) -> np.ndarray:
    """Deterministic 64-bit hash of integer keys, vectorised."""
    with np.errstate(over="ignore"):
        z = np.asarray(values).astype(np.uint64) + np.uint64(_key(seed)) * _GOLD + _GOLD
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def hash_uniform(values, seed: int) -> np.ndarray:
    """Map integer keys to [0, 1) through splitmix64."""
    return (splitmix64(values, seed) >> np.uint64(11)).astype(np.float64) / 2.0**53
