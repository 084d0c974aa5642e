"""Exact Fourier analysis over {0,1}^n, Z_B and the torus, plus F2 linear algebra.

Points of {0,1}^n and frequencies in F2^n are packed into Python/NumPy integers:
bit ``i`` of the integer is coordinate ``i`` (so coordinate 0 is the leftmost
character of a bitstring).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

ZERO_TOL = 1e-12
# phase error F * 2^-52 stays below 1e-3 rad up to this bandlimit
MAX_TORUS_BANDLIMIT = 2**40


def parity(values):
    """Parity of the popcount, elementwise (0 or 1)."""
    arr = np.asarray(values)
    if arr.dtype == object:
        return np.vectorize(lambda v: bin(int(v)).count("1") & 1)(arr).astype(np.int64)
    return (np.bitwise_count(arr.astype(np.uint64)) & 1).astype(np.int64)


def chi(freq: int, points):
    """Character (-1)^<freq, x> evaluated at packed points."""
    return 1.0 - 2.0 * parity(np.bitwise_and(np.asarray(points, dtype=np.int64), freq))


@dataclass(frozen=True, order=True)
class FreqVec:
    """A vector in F2^n, packed as an integer."""

    value: int
    n: int

    def __post_init__(self):
        if self.n < 0 or self.value < 0 or self.value >> self.n:
            raise ValueError(f"frequency {self.value} does not fit in {self.n} bits")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "FreqVec":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0/1")
        return cls(sum(b << i for i, b in enumerate(bits)), len(bits))

    @classmethod
    def from_string(cls, s: str) -> "FreqVec":
        return cls.from_bits(int(c) for c in s)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.n))

    @property
    def weight(self) -> int:
        return bin(self.value).count("1")

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def _as_int(freq, n: int | None = None) -> int:
    if isinstance(freq, FreqVec):
        if n is not None and freq.n != n:
            raise ValueError(f"frequency has length {freq.n}, expected {n}")
        return freq.value
    if isinstance(freq, str):
        return _as_int(FreqVec.from_string(freq), n)
    if isinstance(freq, tuple):
        return _as_int(FreqVec.from_bits(freq), n)
    return int(freq)


def bitstring(value: int, n: int) -> str:
    return "".join(str((value >> i) & 1) for i in range(n))


class BooleanSpectrum:
    """Sparse real spectrum over F2^n; keys are packed frequencies."""

    domain = "boolean"

    def __init__(self, n: int, entries: Mapping | None = None):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.entries: dict[int, float] = {}
        for freq, coeff in (entries or {}).items():
            key = _as_int(freq, n)
            if key < 0 or key >> n:
                raise ValueError(f"frequency {freq!r} does not fit in {n} bits")
            coeff = float(np.real(coeff))
            if abs(coeff) > ZERO_TOL:
                self.entries[key] = self.entries.get(key, 0.0) + coeff
        self.entries = {k: v for k, v in sorted(self.entries.items()) if abs(v) > ZERO_TOL}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, freq) -> float:
        return self.entries.get(_as_int(freq, self.n), 0.0)

    def __eq__(self, other):
        return (
            isinstance(other, BooleanSpectrum)
            and self.n == other.n
            and self.entries == other.entries
        )

    def __repr__(self):
        body = ", ".join(f"{bitstring(k, self.n)}: {v:.6g}" for k, v in self.entries.items())
        return f"BooleanSpectrum(n={self.n}, {{{body}}})"

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.entries)

    def norm(self, p: float = 2) -> float:
        vals = np.abs(np.fromiter(self.entries.values(), float, len(self.entries)))
        if p == 0:
            return float(len(vals))
        return float(np.sum(vals**p) ** (1.0 / p)) if len(vals) else 0.0

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.int64)
        out = np.zeros(pts.shape, dtype=float)
        for freq, coeff in self.entries.items():
            out += coeff * chi(freq, pts)
        return out

    def to_dense(self) -> np.ndarray:
        return self.evaluate(np.arange(2**self.n))

    def allclose(self, other: "BooleanSpectrum", atol: float = 1e-9) -> bool:
        keys = set(self.entries) | set(other.entries)
        return self.n == other.n and all(abs(self[k] - other[k]) <= atol for k in keys)


class TorusSpectrum:
    """Sparse complex spectrum of a bandlimited function on [0, 1)."""

    domain = "torus"

    def __init__(self, F: int, entries: Mapping | None = None):
        if F < 0:
            raise ValueError("bandlimit must be non-negative")
        if F > MAX_TORUS_BANDLIMIT:
            raise ValueError(f"bandlimit {F} exceeds double-precision validity bound")
        self.F = F
        acc: dict[int, complex] = {}
        for freq, coeff in (entries or {}).items():
            freq = int(freq)
            if abs(freq) > F:
                raise ValueError(f"frequency {freq} outside [-{F}, {F}]")
            acc[freq] = acc.get(freq, 0j) + complex(coeff)
        self.entries = {k: v for k, v in sorted(acc.items()) if abs(v) > ZERO_TOL}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, freq) -> complex:
        return self.entries.get(int(freq), 0j)

    def __eq__(self, other):
        return (
            isinstance(other, TorusSpectrum)
            and self.F == other.F
            and self.entries == other.entries
        )

    def __repr__(self):
        return f"TorusSpectrum(F={self.F}, {self.entries})"

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.entries)

    def norm(self, p: float = 2) -> float:
        vals = np.abs(np.fromiter(self.entries.values(), complex, len(self.entries)))
        if p == 0:
            return float(len(vals))
        return float(np.sum(vals**p) ** (1.0 / p)) if len(vals) else 0.0

    def allclose(self, other: "TorusSpectrum", atol: float = 1e-9) -> bool:
        keys = set(self.entries) | set(other.entries)
        return self.F == other.F and all(abs(self[k] - other[k]) <= atol for k in keys)

    def evaluate(self, t) -> np.ndarray:
        return torus_eval(self, t)


class CyclicSpectrum:
    """Spectrum of a function on Z_B: z[x] = sum_l c_l e^{2 pi i l x / B}."""

    domain = "cyclic"

    def __init__(self, B: int, entries: Mapping | None = None):
        if B < 1:
            raise ValueError("modulus must be positive")
        self.B = B
        acc: dict[int, complex] = {}
        for freq, coeff in (entries or {}).items():
            freq = int(freq)
            if not 0 <= freq < B:
                raise ValueError(f"residue {freq} outside [0, {B})")
            acc[freq] = acc.get(freq, 0j) + complex(coeff)
        self.entries = {k: v for k, v in sorted(acc.items()) if abs(v) > ZERO_TOL}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, freq) -> complex:
        return self.entries.get(int(freq) % self.B, 0j)

    def __repr__(self):
        return f"CyclicSpectrum(B={self.B}, {self.entries})"

    def allclose(self, other: "CyclicSpectrum", atol: float = 1e-9) -> bool:
        keys = set(self.entries) | set(other.entries)
        return self.B == other.B and all(abs(self[k] - other[k]) <= atol for k in keys)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(self.entries)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x)
        out = np.zeros(x.shape, dtype=complex)
        for freq, coeff in self.entries.items():
            out += coeff * np.exp(2j * np.pi * ((freq * x) % self.B) / self.B)
        return out

    def to_dense(self) -> np.ndarray:
        return cyclic_idft(self)


# -- transforms ---------------------------------------------------------------


def walsh_hadamard(values) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform: out[xi] = sum_x v[x] (-1)^<xi,x>."""
    a = np.array(values, dtype=float)
    size = a.shape[0]
    if size < 1 or size & (size - 1):
        raise ValueError(f"table length {size} is not a power of two")
    h = 1
    while h < size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1)
        h *= 2
    return a.reshape(size)


def boolean_dft(values) -> BooleanSpectrum:
    """Fourier coefficients f^(xi) = E_x f(x)(-1)^<xi,x> of a dense table."""
    table = np.asarray(values, dtype=float)
    size = table.shape[0]
    if table.ndim != 1 or size < 1 or size & (size - 1):
        raise ValueError(f"table length {size} is not a power of two")
    n = size.bit_length() - 1
    coeffs = walsh_hadamard(table) / size
    return BooleanSpectrum(n, {i: c for i, c in enumerate(coeffs) if abs(c) > ZERO_TOL})


def boolean_eval(spec: BooleanSpectrum, x) -> float:
    """Evaluate a Boolean spectrum at one point given as bits, FreqVec or int."""
    if isinstance(x, (tuple, list, np.ndarray)):
        if len(x) != spec.n:
            raise ValueError(f"point has length {len(x)}, expected {spec.n}")
        x = FreqVec.from_bits(x)
    point = _as_int(x, spec.n)
    if point < 0 or point >> spec.n:
        raise ValueError("point does not fit in n bits")
    total = 0.0
    for freq, coeff in spec.entries.items():
        total += -coeff if bin(freq & point).count("1") & 1 else coeff
    return total


def cyclic_dft(values) -> CyclicSpectrum:
    """c_l = (1/B) sum_x z[x] e^{-2 pi i l x / B}, by direct O(B^2) summation."""
    z = np.asarray(values, dtype=complex)
    B = z.shape[0]
    if B < 1:
        raise ValueError("empty table")
    x = np.arange(B)
    coeffs = np.empty(B, dtype=complex)
    for l in range(B):
        coeffs[l] = np.dot(z, np.exp(-2j * np.pi * ((l * x) % B) / B)) / B
    return CyclicSpectrum(B, {l: c for l, c in enumerate(coeffs) if abs(c) > ZERO_TOL})


def cyclic_idft(spec: CyclicSpectrum) -> np.ndarray:
    return spec.evaluate(np.arange(spec.B))


def torus_eval(spec: TorusSpectrum, t):
    """f(t) = sum_xi c_xi e^{2 pi i xi t}; scalar in, scalar out."""
    arr = np.asarray(t, dtype=float)
    out = np.zeros(arr.shape, dtype=complex)
    for freq, coeff in spec.entries.items():
        out += coeff * np.exp(2j * np.pi * freq * arr)
    return complex(out) if out.ndim == 0 else out


# -- F2 linear algebra ----------------------------------------------------------


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class F2Matrix:
    """Dense matrix over F2 stored as a 0/1 uint8 array."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8) & 1
        if arr.ndim != 2:
            raise ValueError("F2Matrix needs a 2-D array")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @classmethod
    def identity(cls, n: int) -> "F2Matrix":
        return cls(np.eye(n, dtype=np.uint8))

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    @property
    def T(self) -> "F2Matrix":
        return F2Matrix(self.bits.T.copy())

    def __eq__(self, other):
        return isinstance(other, F2Matrix) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __matmul__(self, other: "F2Matrix") -> "F2Matrix":
        prod = self.bits.astype(np.int64) @ other.bits.astype(np.int64)
        return F2Matrix((prod & 1).astype(np.uint8))

    def column_ints(self) -> np.ndarray:
        """Columns packed as integers (bit r = row r)."""
        weights = np.left_shift(np.int64(1), np.arange(self.rows, dtype=np.int64))
        return (self.bits.astype(np.int64) * weights[:, None]).sum(axis=0)

    def row_ints(self) -> np.ndarray:
        weights = np.left_shift(np.int64(1), np.arange(self.cols, dtype=np.int64))
        return (self.bits.astype(np.int64) * weights[None, :]).sum(axis=1)

    def apply(self, points):
        """A x for packed vectors x (vectorised)."""
        pts = np.asarray(points, dtype=np.int64)
        out = np.zeros(pts.shape, dtype=np.int64)
        for c, col in enumerate(self.column_ints()):
            out ^= np.where((pts >> c) & 1, col, 0)
        return out if out.ndim else int(out)

    def rank(self) -> int:
        return f2_rank(self)


def f2_rank(A: F2Matrix) -> int:
    work = [int(r) for r in A.row_ints()]
    rank = 0
    for col in range(A.cols):
        pivot = next((i for i in range(rank, len(work)) if (work[i] >> col) & 1), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for i in range(len(work)):
            if i != rank and (work[i] >> col) & 1:
                work[i] ^= work[rank]
        rank += 1
    return rank


def f2_inverse(A: F2Matrix) -> F2Matrix:
    """Gauss-Jordan inverse over F2."""
    if A.rows != A.cols:
        raise ValueError("matrix is not square")
    n = A.rows
    aug = np.concatenate([A.bits, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        nz = np.nonzero(aug[col:, col])[0]
        if len(nz) == 0:
            raise SingularMatrixError("matrix is singular over F2")
        p = col + nz[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        mask = aug[:, col].astype(bool)
        mask[col] = False
        aug[mask] ^= aug[col]
    return F2Matrix(aug[:, n:].copy())


def f2_solve(A: F2Matrix, freq=None):
    """Inverse of A, or (A^T)^{-1} applied to a frequency when one is given."""
    inv = f2_inverse(A)
    if freq is None:
        return inv
    value = _as_int(freq, A.rows)
    result = inv.T.apply(value)
    return FreqVec(int(result), A.rows) if isinstance(freq, FreqVec) else int(result)


def random_invertible_f2(n: int, rng: np.random.Generator, max_tries: int = 1000) -> F2Matrix:
    """Uniform sample from GL(n, 2) by rejection."""
    if n < 1:
        raise ValueError("n must be at least 1")
    for _ in range(max_tries):
        A = F2Matrix(rng.integers(0, 2, size=(n, n), dtype=np.uint8))
        if f2_rank(A) == n:
            return A
    raise RuntimeError(f"no invertible {n}x{n} matrix after {max_tries} draws")


def affine_pullback_spectrum(spec: BooleanSpectrum, A: F2Matrix, b) -> BooleanSpectrum:
    """Spectrum of x -> g(Ax + b) by the closed form.

    The coefficient at xi is (-1)^<b, zeta> g^(zeta) with zeta = (A^T)^{-1} xi,
    equivalently the coefficient of g at zeta moves to xi = A^T zeta.
    """
    if A.rows != spec.n or A.cols != spec.n:
        raise ValueError("matrix shape does not match spectrum dimension")
    f2_inverse(A)  # raises on singular input
    shift = _as_int(b, spec.n)
    At = A.T
    out = {}
    for zeta, coeff in spec.entries.items():
        sign = -1.0 if bin(shift & zeta).count("1") & 1 else 1.0
        out[int(At.apply(zeta))] = sign * coeff
    return BooleanSpectrum(spec.n, out)


# -- serialization --------------------------------------------------------------


def spectrum_to_dict(spec) -> dict:
    if isinstance(spec, BooleanSpectrum):
        entries = [
            {"freq": bitstring(k, spec.n), "re": float(v), "im": 0.0}
            for k, v in spec.entries.items()
        ]
        return {"domain": "boolean", "n": spec.n, "entries": entries}
    if isinstance(spec, TorusSpectrum):
        size_key, size = "F", spec.F
    elif isinstance(spec, CyclicSpectrum):
        size_key, size = "B", spec.B
    else:
        raise TypeError(f"not a spectrum: {type(spec).__name__}")
    entries = [
        {"freq": int(k), "re": float(v.real), "im": float(v.imag)}
        for k, v in spec.entries.items()
    ]
    return {"domain": spec.domain, size_key: size, "entries": entries}


def spectrum_from_dict(data: Mapping):
    domain = data.get("domain")
    entries = data.get("entries", [])
    if domain == "boolean":
        return BooleanSpectrum(
            int(data["n"]), {FreqVec.from_string(e["freq"]): e["re"] for e in entries}
        )
    values = {int(e["freq"]): complex(e["re"], e.get("im", 0.0)) for e in entries}
    if domain == "torus":
        return TorusSpectrum(int(data["F"]), values)
    if domain == "cyclic":
        return CyclicSpectrum(int(data["B"]), values)
    raise ValueError(f"unknown spectrum domain {domain!r}")


def dumps_spectrum(spec) -> str:
    return json.dumps(spectrum_to_dict(spec), sort_keys=True)


def loads_spectrum(text: str):
    return spectrum_from_dict(json.loads(text))
