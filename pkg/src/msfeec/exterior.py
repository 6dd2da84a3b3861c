"""Exterior algebra on Alt R^n, n <= 3 (any n works, but nothing larger is tested).

Basis of Alt^k R^n: the increasing multi-indices of length k, 1-based, in
lexicographic order.  All signs are computed by counting inversions, so the
tables below contain only 0 and +-1 and every identity holds exactly in
floating point.

Coefficient arrays carry their basis axis last; leading axes are batch axes
(quadrature points, basis functions, ...).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has a repeat)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv % 2 else 1


@dataclass(frozen=True)
class MultiIndex:
    n: int
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"multi-index {idx} is not strictly increasing")
        if idx and (idx[0] < 1 or idx[-1] > self.n):
            raise ValueError(f"multi-index {idx} out of range for n={self.n}")

    @property
    def degree(self) -> int:
        return len(self.indices)

    def position(self) -> int:
        return index_of(self.n, self.degree)[self.indices]

    def complement(self) -> "MultiIndex":
        return MultiIndex(self.n, tuple(i for i in range(1, self.n + 1) if i not in self.indices))


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple:
    if k < 0 or k > n:
        return ()
    return tuple(combinations(range(1, n + 1), k))


@lru_cache(maxsize=None)
def index_of(n: int, k: int) -> dict:
    return {I: a for a, I in enumerate(multi_indices(n, k))}


def dim(n: int, k: int) -> int:
    return comb(n, k) if 0 <= k <= n else 0


@lru_cache(maxsize=None)
def wedge_tensor(n: int, k: int, l: int) -> np.ndarray:
    """T[a, b, c] with dx^{I_a} ^ dx^{J_b} = sum_c T[a,b,c] dx^{K_c}."""
    T = np.zeros((dim(n, k), dim(n, l), dim(n, k + l)))
    if k + l > n:
        return T
    target = index_of(n, k + l)
    for a, I in enumerate(multi_indices(n, k)):
        for b, J in enumerate(multi_indices(n, l)):
            s = perm_sign(I + J)
            if s:
                T[a, b, target[tuple(sorted(I + J))]] = s
    T.setflags(write=False)
    return T


@lru_cache(maxsize=None)
def hodge_matrix(n: int, k: int) -> np.ndarray:
    """H with (star w) = H @ w for coefficient vectors of degree k.

    star dx^I = sign(I, I^c) dx^{I^c}, which is the unique choice with
    dx^I ^ star dx^I = vol for the orthonormal increasing basis.
    """
    H = np.zeros((dim(n, n - k), dim(n, k)))
    target = index_of(n, n - k)
    for a, I in enumerate(multi_indices(n, k)):
        Ic = tuple(i for i in range(1, n + 1) if i not in I)
        H[target[Ic], a] = perm_sign(I + Ic)
    H.setflags(write=False)
    return H


def hodge_inverse_matrix(n: int, k: int) -> np.ndarray:
    """Inverse of star acting on degree k (maps degree k to n-k)."""
    # star star = (-1)^{k(n-k)} on degree k, so star^{-1} = (-1)^{k(n-k)} star
    return (-1) ** (k * (n - k)) * hodge_matrix(n, k)


def wedge_arrays(a: np.ndarray, b: np.ndarray, n: int, k: int, l: int) -> np.ndarray:
    """Batched wedge of pure-degree coefficient arrays (broadcast over leading axes)."""
    T = wedge_tensor(n, k, l)
    return np.einsum("...a,...b,abc->...c", a, b, T)


def hodge_array(a: np.ndarray, n: int, k: int) -> np.ndarray:
    return a @ hodge_matrix(n, k).T


class GradedAltValue:
    """Element of Alt R^n = direct sum of Alt^k R^n, k = 0..n.

    ``coeffs[k]`` has shape ``batch + (C(n,k),)``.  A degree that is not
    present is stored as zeros.
    """

    def __init__(self, n: int, coeffs=None, batch=()):
        self.n = int(n)
        if coeffs is None:
            coeffs = [np.zeros(tuple(batch) + (dim(n, k),)) for k in range(n + 1)]
        coeffs = [np.asarray(c, dtype=float) for c in coeffs]
        if len(coeffs) != n + 1:
            raise ValueError(f"expected {n + 1} graded components, got {len(coeffs)}")
        for k, c in enumerate(coeffs):
            if c.shape[-1:] != (dim(n, k),):
                raise ValueError(f"degree {k}: expected trailing length {dim(n, k)}, got shape {c.shape}")
        self.coeffs = coeffs

    @classmethod
    def pure(cls, n: int, k: int, values) -> "GradedAltValue":
        values = np.asarray(values, dtype=float)
        batch = values.shape[:-1]
        out = cls(n, batch=batch)
        out.coeffs[k] = values.copy()
        return out

    @classmethod
    def from_flat(cls, n: int, flat) -> "GradedAltValue":
        flat = np.asarray(flat, dtype=float)
        if flat.shape[-1] != 2 ** n:
            raise ValueError(f"flat vector must have length {2 ** n}")
        cuts = np.cumsum([0] + [dim(n, k) for k in range(n + 1)])
        return cls(n, [flat[..., cuts[k]:cuts[k + 1]] for k in range(n + 1)])

    def to_flat(self) -> np.ndarray:
        return np.concatenate(self.coeffs, axis=-1)

    @property
    def batch_shape(self):
        return self.coeffs[0].shape[:-1]

    def degree(self, k: int) -> np.ndarray:
        return self.coeffs[k]

    def _check(self, other):
        if not isinstance(other, GradedAltValue) or other.n != self.n:
            raise ValueError("dimension mismatch between graded values")

    def __add__(self, other):
        self._check(other)
        return GradedAltValue(self.n, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        self._check(other)
        return GradedAltValue(self.n, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return GradedAltValue(self.n, [-a for a in self.coeffs])

    def __mul__(self, s):
        return GradedAltValue(self.n, [s * a for a in self.coeffs])

    __rmul__ = __mul__

    def __repr__(self):
        parts = []
        for k, c in enumerate(self.coeffs):
            if np.any(c):
                parts.append(f"{k}:{np.round(c, 12).tolist()}")
        return f"GradedAltValue(n={self.n}, {', '.join(parts) or '0'})"


def wedge(a: GradedAltValue, b: GradedAltValue) -> GradedAltValue:
    a._check(b)
    n = a.n
    out = GradedAltValue(n, batch=np.broadcast_shapes(a.batch_shape, b.batch_shape))
    for k in range(n + 1):
        for l in range(n + 1 - k):
            out.coeffs[k + l] = out.coeffs[k + l] + wedge_arrays(a.coeffs[k], b.coeffs[l], n, k, l)
    return out


def hodge(a: GradedAltValue) -> GradedAltValue:
    n = a.n
    return GradedAltValue(n, [hodge_array(a.coeffs[n - j], n, n - j) for j in range(n + 1)])


def hodge_inverse(a: GradedAltValue) -> GradedAltValue:
    n = a.n
    return GradedAltValue(n, [a.coeffs[n - j] @ hodge_inverse_matrix(n, n - j).T for j in range(n + 1)])


def inner(a: GradedAltValue, b: GradedAltValue):
    a._check(b)
    return sum(np.sum(x * y, axis=-1) for x, y in zip(a.coeffs, b.coeffs))


def ms_form(w1: GradedAltValue, w2: GradedAltValue) -> GradedAltValue:
    """omega(w1, w2) = sum_k (w1^{k-1} ^ *w2^k - w2^{k-1} ^ *w1^k), a pure (n-1)-form."""
    w1._check(w2)
    n = w1.n
    acc = 0.0
    for k in range(1, n + 1):
        s1 = hodge_array(w2.coeffs[k], n, k)
        s2 = hodge_array(w1.coeffs[k], n, k)
        acc = acc + wedge_arrays(w1.coeffs[k - 1], s1, n, k - 1, n - k)
        acc = acc - wedge_arrays(w2.coeffs[k - 1], s2, n, k - 1, n - k)
    batch = np.broadcast_shapes(w1.batch_shape, w2.batch_shape)
    if np.isscalar(acc):
        acc = np.zeros(batch + (dim(n, n - 1),))
    return GradedAltValue.pure(n, n - 1, acc)


def basis_form(n: int, indices) -> GradedAltValue:
    """dx^I as a graded value, e.g. ``basis_form(3, (1, 2))``."""
    I = MultiIndex(n, tuple(indices))
    v = np.zeros(dim(n, I.degree))
    v[I.position()] = 1.0
    return GradedAltValue.pure(n, I.degree, v)
