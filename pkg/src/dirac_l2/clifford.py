"""Dense arithmetic in the real Clifford algebra R_n (all generators square to -1).

A multivector is stored as ``2**n`` real coefficients. The coefficient of the
basis blade ``e_A`` sits at index ``A`` where bit ``j-1`` of ``A`` is set iff
``j`` belongs to the multi-index. Index 0 is the scalar ``e_0 = 1``.

Besides the immutable :class:`Multivector` value type, the module exposes
batched kernels (``*_batch``) acting on arrays of shape ``(..., 2**n)``. Those
are what the field, quadrature and solver modules use in their inner loops.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, UsageError

MIN_DIM = 2
MAX_DIM = 12


def check_dim(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or not MIN_DIM <= n <= MAX_DIM:
        raise ConfigurationError(f"dimension must be an integer in [{MIN_DIM}, {MAX_DIM}], got {n!r}")
    return int(n)


def popcount(bits: int) -> int:
    return bin(bits).count("1")


@dataclass(frozen=True)
class MultiIndex:
    """Ordered multi-index ``A = {j1 < ... < jl}`` encoded as a bitmask."""

    bits: int
    n: int

    def __post_init__(self):
        check_dim(self.n)
        if not 0 <= self.bits < (1 << self.n):
            raise ConfigurationError(f"bitmask {self.bits} out of range for n={self.n}")

    @classmethod
    def from_set(cls, indices: Iterable[int], n: int) -> MultiIndex:
        bits = 0
        for j in indices:
            if not 1 <= j <= n:
                raise ConfigurationError(f"generator index {j} outside 1..{n}")
            bits |= 1 << (j - 1)
        return cls(bits, n)

    @property
    def grade(self) -> int:
        return popcount(self.bits)

    def as_set(self) -> frozenset[int]:
        return frozenset(j + 1 for j in range(self.n) if self.bits >> j & 1)


def _blade_sign(a: int, b: int) -> int:
    # pairs (i in A, j in B) with i > j, plus one factor -1 per shared generator
    swaps = 0
    shifted = a >> 1
    while shifted:
        swaps += popcount(shifted & b)
        shifted >>= 1
    swaps += popcount(a & b)
    return -1 if swaps & 1 else 1


def basis_product(A: MultiIndex | int, B: MultiIndex | int, n: int) -> tuple[int, MultiIndex]:
    """Return ``(sign, C)`` with ``e_A e_B = sign * e_C``."""
    n = check_dim(n)
    a = A.bits if isinstance(A, MultiIndex) else int(A)
    b = B.bits if isinstance(B, MultiIndex) else int(B)
    if not (0 <= a < 1 << n and 0 <= b < 1 << n):
        raise ConfigurationError(f"multi-index out of range for n={n}")
    return _blade_sign(a, b), MultiIndex(a ^ b, n)


@lru_cache(maxsize=None)
def cayley_signs(n: int) -> np.ndarray:
    """``S[a, b]`` = sign of ``e_a e_b``; the product blade is ``a ^ b``."""
    dim = 1 << n
    signs = np.empty((dim, dim), dtype=np.float64)
    for a in range(dim):
        for b in range(dim):
            signs[a, b] = _blade_sign(a, b)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=None)
def _left_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    # row a: perm[a, c] = a ^ c and sgn[a, c] = sign(e_a e_{a^c}), so (fg)_c = sum_a f_a sgn[a,c] g[perm[a,c]]
    dim = 1 << n
    idx = np.arange(dim)
    perm = idx[None, :] ^ idx[:, None]
    sgn = np.take_along_axis(cayley_signs(n), perm, axis=1).astype(float)
    perm.setflags(write=False)
    sgn.setflags(write=False)
    return perm, sgn


@lru_cache(maxsize=None)
def grades(n: int) -> np.ndarray:
    g = np.array([popcount(a) for a in range(1 << n)])
    g.setflags(write=False)
    return g


@lru_cache(maxsize=None)
def conj_signs(n: int) -> np.ndarray:
    g = grades(n)
    s = np.where((g * (g + 1) // 2) % 2 == 0, 1.0, -1.0)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def generator_matrix(n: int, j: int) -> np.ndarray:
    """Matrix of ``g -> e_j g`` on coefficient vectors (a signed permutation)."""
    dim = 1 << n
    a = 1 << (j - 1)
    mat = np.zeros((dim, dim))
    signs = cayley_signs(n)
    for b in range(dim):
        mat[a ^ b, b] = signs[a, b]
    mat.setflags(write=False)
    return mat


# -- batched kernels -------------------------------------------------------

def _rows(*arrays: np.ndarray, widths: tuple[int, ...]) -> tuple[tuple, list[np.ndarray]]:
    """Broadcast leading axes and flatten them to rows (last axis of width ``widths[i]``)."""
    lead = np.broadcast_shapes(*(a.shape[:-1] for a in arrays))
    flat = [np.ascontiguousarray(np.broadcast_to(a, lead + (w,)), dtype=float).reshape(-1, w)
            for a, w in zip(arrays, widths)]
    return lead, flat


def gmul_batch(F: np.ndarray, G: np.ndarray, n: int) -> np.ndarray:
    """Geometric product of coefficient arrays broadcast over leading axes."""
    perm, sgn = _left_table(n)
    dim = 1 << n
    lead, (Fb, Gb) = _rows(np.asarray(F), np.asarray(G), widths=(dim, dim))
    return _kernels()["gmul"](Fb, Gb, perm, sgn).reshape(lead + (dim,))


@lru_cache(maxsize=None)
def _kernels() -> dict:
    # compiled lazily; a single pass over memory beats the per-blade numpy loops by ~10x
    import numba

    @numba.njit(cache=True)
    def gmul(F, G, perm, sgn):
        rows, dim = F.shape
        out = np.zeros((rows, dim))
        for r in range(rows):
            for a in range(dim):
                fa = F[r, a]
                if fa == 0.0:
                    continue
                for c in range(dim):
                    out[r, c] += sgn[a, c] * fa * G[r, perm[a, c]]
        return out

    @numba.njit(cache=True)
    def vec_left(v, G, sgn):
        rows, dim = G.shape
        n = v.shape[1]
        out = np.zeros((rows, dim))
        for r in range(rows):
            for j in range(n):
                a = 1 << j
                vj = v[r, j]
                if vj == 0.0:
                    continue
                for c in range(dim):
                    out[r, c] += vj * sgn[a, c] * G[r, c ^ a]
        return out

    @numba.njit(cache=True)
    def gen_left(a, G, sgn):
        rows, dim = G.shape
        out = np.empty((rows, dim))
        for r in range(rows):
            for c in range(dim):
                out[r, c] = sgn[a, c] * G[r, c ^ a]
        return out

    return {"gmul": gmul, "vec_left": vec_left, "gen_left": gen_left}


def vec_left_batch(v: np.ndarray, G: np.ndarray, n: int) -> np.ndarray:
    """``(sum_j v_j e_j) G`` for vector components ``v[..., j-1]``."""
    _, sgn = _left_table(n)
    dim = 1 << n
    lead, (vb, Gb) = _rows(np.asarray(v), np.asarray(G), widths=(n, dim))
    return _kernels()["vec_left"](vb, Gb, sgn).reshape(lead + (dim,))


def vec_right_batch(G: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    """``G (sum_j v_j e_j)``."""
    signs = cayley_signs(n)
    idx = np.arange(1 << n)
    out = None
    for j in range(n):
        a = 1 << j
        src = idx ^ a
        # (G e_a)_c = G_{c^a} * sign(e_{c^a} e_a)
        term = v[..., j, None] * (signs[src, a] * G[..., src])
        out = term if out is None else out + term
    return out


def gen_left_batch(j: int, G: np.ndarray, n: int) -> np.ndarray:
    """``e_j G`` for a single generator (1-based ``j``)."""
    _, sgn = _left_table(n)
    G = np.asarray(G, dtype=float)
    Gb = np.ascontiguousarray(G).reshape(-1, 1 << n)
    return _kernels()["gen_left"](1 << (j - 1), Gb, sgn).reshape(G.shape)


def gen_right_batch(G: np.ndarray, j: int, n: int) -> np.ndarray:
    signs = cayley_signs(n)
    a = 1 << (j - 1)
    src = np.arange(1 << n) ^ a
    return signs[src, a] * G[..., src]


def conj_batch(F: np.ndarray, n: int) -> np.ndarray:
    return F * conj_signs(n)


def embed_vector(v: np.ndarray, n: int) -> np.ndarray:
    """Coefficient array of ``sum_j v_j e_j``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (1 << n,))
    for j in range(n):
        out[..., 1 << j] = v[..., j]
    return out


def norm_sq_batch(F: np.ndarray) -> np.ndarray:
    return np.sum(F * F, axis=-1)


def inner_batch(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.sum(F * G, axis=-1)


# -- value type ------------------------------------------------------------

class Multivector:
    """Immutable element of R_n with dense coefficients."""

    __slots__ = ("n", "coeffs")

    def __init__(self, coeffs, n: int | None = None):
        arr = np.array(coeffs, dtype=np.float64)
        if arr.ndim != 1:
            raise UsageError("multivector coefficients must be one-dimensional")
        if n is None:
            n = int(round(np.log2(arr.size))) if arr.size else -1
        n = check_dim(n)
        if arr.size != 1 << n:
            raise UsageError(f"expected {1 << n} coefficients for n={n}, got {arr.size}")
        arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, key, value):
        raise AttributeError("Multivector is immutable")

    @classmethod
    def zero(cls, n: int) -> Multivector:
        return cls(np.zeros(1 << check_dim(n)), n)

    @classmethod
    def scalar(cls, value: float, n: int) -> Multivector:
        c = np.zeros(1 << check_dim(n))
        c[0] = value
        return cls(c, n)

    @classmethod
    def blade(cls, indices: Iterable[int] | MultiIndex, n: int, value: float = 1.0) -> Multivector:
        A = indices if isinstance(indices, MultiIndex) else MultiIndex.from_set(indices, n)
        c = np.zeros(1 << check_dim(n))
        c[A.bits] = value
        return cls(c, n)

    @classmethod
    def vector(cls, components) -> Multivector:
        v = np.asarray(components, dtype=float)
        n = check_dim(v.size)
        return cls(embed_vector(v, n), n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Multivector:
        return cls(rng.standard_normal(1 << check_dim(n)), n)

    def __getitem__(self, A) -> float:
        bits = A.bits if isinstance(A, MultiIndex) else MultiIndex.from_set(A, self.n).bits
        return float(self.coeffs[bits])

    def _same(self, other: Multivector) -> None:
        if not isinstance(other, Multivector):
            raise UsageError(f"expected Multivector, got {type(other).__name__}")
        if other.n != self.n:
            raise UsageError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector.scalar(other, self.n)
        self._same(other)
        return Multivector(self.coeffs + other.coeffs, self.n)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector.scalar(other, self.n)
        self._same(other)
        return Multivector(self.coeffs - other.coeffs, self.n)

    def __neg__(self):
        return Multivector(-self.coeffs, self.n)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return gmul(self, other)
        return Multivector(self.coeffs * float(other), self.n)

    def __rmul__(self, other):
        return Multivector(self.coeffs * float(other), self.n)

    def __truediv__(self, other):
        return Multivector(self.coeffs / float(other), self.n)

    def __eq__(self, other):
        return isinstance(other, Multivector) and other.n == self.n and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.n, self.coeffs.tobytes()))

    def __repr__(self):
        terms = []
        for a in np.flatnonzero(self.coeffs):
            name = "1" if a == 0 else "e" + "".join(str(j + 1) for j in range(self.n) if a >> j & 1)
            terms.append(f"{self.coeffs[a]:+.6g}*{name}")
        return f"Multivector(n={self.n}: {' '.join(terms) or '0'})"

    def conj(self) -> Multivector:
        return conj(self)

    @property
    def re(self) -> float:
        return float(self.coeffs[0])

    def norm_sq(self) -> float:
        return float(np.sum(self.coeffs * self.coeffs))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def grade_part(self, k: int) -> Multivector:
        return Multivector(np.where(grades(self.n) == k, self.coeffs, 0.0), self.n)

    def is_paravector(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs[grades(self.n) > 1]) <= atol))

    def allclose(self, other: Multivector, rtol: float = 1e-12, atol: float = 1e-14) -> bool:
        self._same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))


def paravector(scalar: float, vector) -> Multivector:
    """``scalar + sum_j vector[j-1] e_j``."""
    v = np.asarray(vector, dtype=float)
    n = check_dim(v.size)
    c = embed_vector(v, n)
    c[0] = scalar
    return Multivector(c, n)


def gmul(f: Multivector, g: Multivector) -> Multivector:
    f._same(g)
    return Multivector(gmul_batch(f.coeffs, g.coeffs, f.n), f.n)


def conj(f: Multivector) -> Multivector:
    return Multivector(conj_batch(f.coeffs, f.n), f.n)


def re(f: Multivector) -> float:
    return f.re


def inner(f: Multivector, g: Multivector) -> float:
    """Real inner product ``Re(f conj(g)) = sum_A f_A g_A``."""
    f._same(g)
    return float(np.sum(f.coeffs * g.coeffs))


def norm(f: Multivector) -> float:
    return f.norm()


def re_cyclic_check(a: Multivector, b: Multivector) -> float:
    """``|Re(ab) - Re(ba)|``; vanishes up to rounding for all a, b."""
    return abs(gmul(a, b).re - gmul(b, a).re)
