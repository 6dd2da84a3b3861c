"""Polynomial differential forms on physical simplices.

A form of degree k and order r on a cell K is stored as a coefficient
array of shape (dim P_r, C(n,k)) over the monomials of xi = (x - c_K)/h_K
(c_K the centroid, h_K the diameter) times the increasing basis dx^I.
Coefficient arrays may carry leading batch axes; a batched form is a
stack of forms sharing (K, k, r), which is how assembly handles whole
element bases at once.

Facet forms live on an (n-1)-simplex with coordinates s in the canonical
frame, with monomials in s / h_e.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
from scipy.linalg import qr

from . import exterior as ext
from .mesh import FacetGeometry, SimplicialMesh, Simplex


class ConfigurationError(ValueError):
    pass


# ----------------------------------------------------------------------
# scalar monomials

def num_monomials(m: int, r: int) -> int:
    return comb(r + m, m) if r >= 0 else 0


@lru_cache(maxsize=None)
def exponents(m: int, r: int) -> np.ndarray:
    """Exponents of total degree <= r, graded, so P_{r-1} is a prefix of P_r."""
    rows = []
    for deg in range(r + 1):
        for combo in combinations(range(deg + m - 1), m - 1) if m > 0 else [()]:
            if m == 0:
                if deg == 0:
                    rows.append(())
                continue
            # stars and bars
            cuts = (-1,) + combo + (deg + m - 1,)
            rows.append(tuple(cuts[i + 1] - cuts[i] - 1 for i in range(m)))
    E = np.array(rows, dtype=int).reshape(len(rows), m)
    # lexicographically descending inside each degree: x^2, xy, y^2, ...
    order = sorted(range(len(E)), key=lambda i: (E[i].sum(), tuple(-E[i])))
    E = E[order]
    E.setflags(write=False)
    return E


@lru_cache(maxsize=None)
def _exponent_index(m: int, r: int) -> dict:
    return {tuple(e): i for i, e in enumerate(exponents(m, r))}


@lru_cache(maxsize=None)
def derivative_matrices(m: int, r: int) -> np.ndarray:
    """D[i] maps coefficients of p to those of dp/dxi_i (same order r)."""
    E = exponents(m, r)
    idx = _exponent_index(m, r)
    D = np.zeros((m, len(E), len(E)))
    for a, e in enumerate(E):
        for i in range(m):
            if e[i] > 0:
                f = list(e)
                f[i] -= 1
                D[i, idx[tuple(f)], a] = e[i]
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def shift_matrices(m: int, r: int) -> np.ndarray:
    """S[i] maps coefficients of p (order r) to those of xi_i p (order r+1)."""
    E = exponents(m, r)
    idx = _exponent_index(m, r + 1)
    S = np.zeros((m, num_monomials(m, r + 1), len(E)))
    for a, e in enumerate(E):
        for i in range(m):
            f = list(e)
            f[i] += 1
            S[i, idx[tuple(f)], a] = 1.0
    S.setflags(write=False)
    return S


def monomial_values(m: int, r: int, xi: np.ndarray) -> np.ndarray:
    """(npts, dim P_r) values of the monomials at local coordinates xi."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    E = exponents(m, r)
    if m == 0:
        return np.ones((xi.shape[0], 1))
    return np.prod(xi[:, None, :] ** E[None, :, :], axis=2)


def pad_order(coeffs: np.ndarray, m: int, r_to: int) -> np.ndarray:
    N = num_monomials(m, r_to)
    cur = coeffs.shape[-2]
    if cur == N:
        return coeffs
    if cur > N:
        raise ValueError("cannot pad to a lower order")
    pad = [(0, 0)] * coeffs.ndim
    pad[-2] = (0, N - cur)
    return np.pad(coeffs, pad)


# ----------------------------------------------------------------------
# forms on cells

class PolyDiffForm:
    def __init__(self, simplex: Simplex, k: int, r: int, coeffs, cell=None):
        self.simplex = simplex
        self.n = simplex.n
        self.k = int(k)
        self.r = int(r)
        self.cell = cell
        c = np.asarray(coeffs, dtype=float)
        want = (num_monomials(self.n, self.r), ext.dim(self.n, self.k))
        if c.shape[-2:] != want:
            raise ValueError(f"coefficient shape {c.shape} does not end with {want}")
        self.coeffs = c

    @classmethod
    def zeros(cls, simplex, k, r, batch=(), cell=None):
        shape = tuple(batch) + (num_monomials(simplex.n, r), ext.dim(simplex.n, k))
        return cls(simplex, k, r, np.zeros(shape), cell)

    @classmethod
    def from_function(cls, simplex, k, r, func, cell=None):
        """L2 projection of func(x) -> (npts, C(n,k)) onto P_r Lambda^k."""
        x, w = simplex.quadrature(2 * r + 4)
        V = monomial_values(simplex.n, r, simplex.local_coords(x))
        G = V.T @ (w[:, None] * V)
        rhs = V.T @ (w[:, None] * np.asarray(func(x), dtype=float).reshape(len(x), -1))
        return cls(simplex, k, r, np.linalg.solve(G, rhs), cell)

    @property
    def batch_shape(self):
        return self.coeffs.shape[:-2]

    def _like(self, k, r, coeffs):
        return PolyDiffForm(self.simplex, k, r, coeffs, self.cell)

    def __call__(self, x) -> np.ndarray:
        V = monomial_values(self.n, self.r, self.simplex.local_coords(x))
        return np.einsum("pm,...mc->...pc", V, self.coeffs)

    def value(self, x) -> ext.GradedAltValue:
        return ext.GradedAltValue.pure(self.n, self.k, self(x))

    def at_order(self, r):
        return self._like(self.k, r, pad_order(self.coeffs, self.n, r))

    def __add__(self, other):
        r = max(self.r, other.r)
        return self._like(self.k, r, self.at_order(r).coeffs + other.at_order(r).coeffs)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, s):
        return self._like(self.k, self.r, s * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __len__(self):
        return self.coeffs.shape[0] if self.coeffs.ndim > 2 else 1

    def __getitem__(self, i):
        return self._like(self.k, self.r, self.coeffs[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self):
        return f"PolyDiffForm(n={self.n}, k={self.k}, r={self.r}, batch={self.batch_shape})"


def stack(forms) -> PolyDiffForm:
    forms = list(forms)
    r = max(f.r for f in forms)
    f0 = forms[0]
    return PolyDiffForm(f0.simplex, f0.k, r, np.stack([f.at_order(r).coeffs for f in forms]), f0.cell)


def ext_d(w: PolyDiffForm) -> PolyDiffForm:
    n, k = w.n, w.k
    D = derivative_matrices(n, w.r) / w.simplex.diameter
    T = ext.wedge_tensor(n, 1, k)
    DC = np.einsum("imn,...na->i...ma", D, w.coeffs)
    out = np.einsum("i...ma,iac->...mc", DC, T)
    return w._like(k + 1, w.r, out)


def hodge_form(w: PolyDiffForm) -> PolyDiffForm:
    return w._like(w.n - w.k, w.r, w.coeffs @ ext.hodge_matrix(w.n, w.k).T)


def hodge_inverse_form(w: PolyDiffForm) -> PolyDiffForm:
    return w._like(w.n - w.k, w.r, w.coeffs @ ext.hodge_inverse_matrix(w.n, w.k).T)


def codiff(w: PolyDiffForm) -> PolyDiffForm:
    """delta = (-1)^k star^{-1} d star."""
    if w.k == 0:
        return _empty(w, -1)
    return (-1) ** w.k * hodge_inverse_form(ext_d(hodge_form(w)))


def _empty(w, k):
    out = object.__new__(PolyDiffForm)
    out.simplex, out.n, out.k, out.r, out.cell = w.simplex, w.n, k, w.r, w.cell
    out.coeffs = np.zeros(w.coeffs.shape[:-1] + (0,))
    return out


@lru_cache(maxsize=None)
def _contraction_tensor(n: int, k: int) -> np.ndarray:
    """K[i, J, b]: iota_{e_i} dx^J = sum_b K[i,J,b] dx^{I_b} (J of degree k)."""
    K = np.zeros((n, ext.dim(n, k), ext.dim(n, k - 1)))
    target = ext.index_of(n, k - 1)
    for a, J in enumerate(ext.multi_indices(n, k)):
        for pos, j in enumerate(J):
            K[j - 1, a, target[J[:pos] + J[pos + 1:]]] = (-1) ** pos
    return K


def koszul(w: PolyDiffForm) -> PolyDiffForm:
    """Contraction with the position field x - c_K; raises the order by one."""
    n, k = w.n, w.k
    if k == 0:
        return _empty(w, -1)
    S = shift_matrices(n, w.r) * w.simplex.diameter
    K = _contraction_tensor(n, k)
    SC = np.einsum("imn,...na->i...ma", S, w.coeffs)
    out = np.einsum("i...ma,iab->...mb", SC, K)
    return w._like(k - 1, w.r + 1, out)


# ----------------------------------------------------------------------
# spaces of forms

@dataclass(frozen=True)
class FormSpaceSpec:
    family: str  # "P" (full) or "P-" (trimmed)
    r: int
    k: int

    def __post_init__(self):
        fam = {"P": "P", "full": "P", "P-": "P-", "trimmed": "P-", "Pminus": "P-"}.get(self.family)
        if fam is None:
            raise ConfigurationError(f"unknown space family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if self.r < 0 or (fam == "P-" and self.r < 1):
            raise ConfigurationError(f"unsupported order r={self.r} for family {fam}")

    def dimension(self, n: int) -> int:
        if self.k < 0 or self.k > n:
            return 0
        if self.family == "P":
            return comb(self.r + n, n) * comb(n, self.k)
        return comb(self.r + self.k - 1, self.k) * comb(n + self.r, n - self.k)

    @property
    def order(self) -> int:
        """Polynomial order of the coefficient storage."""
        return self.r


@lru_cache(maxsize=None)
def _reference_basis_coeffs(family: str, r: int, k: int, n: int) -> np.ndarray:
    """Basis coefficients over xi-monomials; depends only on (family, r, k, n).

    The Koszul operator scales with h, but the span does not, so the basis
    of the trimmed space can be computed once in xi coordinates.
    """
    N = num_monomials(n, r)
    Ck = ext.dim(n, k)
    if family == "P":
        B = np.zeros((N * Ck, N, Ck))
        for a in range(N):
            for b in range(Ck):
                B[a * Ck + b, a, b] = 1.0
        return B
    lower = _reference_basis_coeffs("P", r - 1, k, n)
    lower = pad_order(lower, n, r)
    if k == n:
        return lower
    # kappa applied to homogeneous degree r-1 monomials times dx^J, |J| = k+1
    E = exponents(n, r - 1)
    homog = [i for i, e in enumerate(E) if e.sum() == r - 1]
    S = shift_matrices(n, r - 1)
    K = _contraction_tensor(n, k + 1)
    cands = []
    for a in homog:
        for J in range(ext.dim(n, k + 1)):
            c = np.zeros((n, N, Ck))
            for i in range(n):
                c[i] = np.outer(S[i][:, a], K[i, J])
            cands.append(c.sum(axis=0))
    cands = np.array(cands)
    flat = cands.reshape(len(cands), -1).T
    _, R, piv = qr(flat, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * diag.max()))
    return np.concatenate([lower, cands[np.sort(piv[:rank])]], axis=0)


def basis_stack(space: FormSpaceSpec, simplex: Simplex, cell=None) -> PolyDiffForm:
    n = simplex.n
    if space.k < 0 or space.k > n:
        raise ConfigurationError(f"degree {space.k} out of range for n={n}")
    B = _reference_basis_coeffs(space.family, space.r, space.k, n)
    return PolyDiffForm(simplex, space.k, space.r, B.copy(), cell)


def basis(space: FormSpaceSpec, simplex: Simplex, cell=None) -> list:
    return list(basis_stack(space, simplex, cell))


# ----------------------------------------------------------------------
# facet forms and traces

class FacetPolyForm:
    def __init__(self, geom: FacetGeometry, k: int, r: int, coeffs, facet=None, side=None):
        self.geom = geom
        self.m = geom.m
        self.k = int(k)
        self.r = int(r)
        self.facet = facet
        self.side = side
        c = np.asarray(coeffs, dtype=float)
        want = (num_monomials(self.m, self.r), ext.dim(self.m, self.k))
        if c.shape[-2:] != want:
            raise ValueError(f"facet coefficient shape {c.shape} does not end with {want}")
        if self.k > self.m:
            raise ValueError("facet form degree exceeds facet dimension")
        self.coeffs = c

    @classmethod
    def zeros(cls, geom, k, r, facet=None, side=None):
        return cls(geom, k, r, np.zeros((num_monomials(geom.m, r), ext.dim(geom.m, k))), facet, side)

    def __call__(self, s) -> np.ndarray:
        V = monomial_values(self.m, self.r, self.geom.local_coords(s))
        return np.einsum("pm,...mc->...pc", V, self.coeffs)

    def at_order(self, r):
        return FacetPolyForm(self.geom, self.k, r, pad_order(self.coeffs, self.m, r), self.facet, self.side)

    def _combine(self, other, sa, sb):
        r = max(self.r, other.r)
        c = sa * self.at_order(r).coeffs + sb * other.at_order(r).coeffs
        return FacetPolyForm(self.geom, self.k, r, c, self.facet, self.side)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, s):
        return FacetPolyForm(self.geom, self.k, self.r, s * self.coeffs, self.facet, self.side)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __repr__(self):
        return f"FacetPolyForm(facet={self.facet}, side={self.side}, k={self.k}, r={self.r})"


def facet_fit(geom: FacetGeometry, k: int, r: int, values, degree=None):
    """Coefficients of the L2 projection onto P_r Lambda^k(e) of values given at
    the facet quadrature of exactness ``degree`` (default 2r)."""
    deg = 2 * r if degree is None else degree
    _, s, w = geom.quadrature(deg)
    V = monomial_values(geom.m, r, geom.local_coords(s))
    G = V.T @ (w[:, None] * V)
    rhs = np.einsum("pm,p,...pc->...mc", V, w, values)
    return np.einsum("ab,...bc->...ac", np.linalg.inv(G), rhs)


def pullback_matrix(frame: np.ndarray, k: int) -> np.ndarray:
    """P[I, J] = det(frame[I, J]): tr dx^I = sum_J P[I,J] ds^J."""
    n, m = frame.shape
    P = np.zeros((ext.dim(n, k), ext.dim(m, k)))
    for a, I in enumerate(ext.multi_indices(n, k)):
        for b, J in enumerate(ext.multi_indices(m, k)):
            P[a, b] = np.linalg.det(frame[np.ix_([i - 1 for i in I], [j - 1 for j in J])]) if k else 1.0
    return P


def tangential_map(mesh: SimplicialMesh, f: int, k: int) -> np.ndarray:
    """Values of w (degree k) times this matrix give tr w in the canonical facet frame."""
    return pullback_matrix(mesh.geometry[f].frame, k)


def normal_map(mesh: SimplicialMesh, f: int, s: int, k: int) -> np.ndarray:
    """Values of w (degree k) times this matrix give w^nor for side (f, s).

    w^nor = hat-star^{-1} tr star w, with hat-star built on the orientation
    induced by the cell; relative to the canonical facet frame that is the
    canonical facet star times the side's orientation sign.
    """
    n = mesh.n
    side = mesh.sides[(f, s)]
    if k == 0:
        return np.zeros((1, 0)) if n == 1 else np.zeros((ext.dim(n, 0), 0))
    H = ext.hodge_matrix(n, k).T                    # degree k -> n-k
    P = pullback_matrix(mesh.geometry[f].frame, n - k)  # to facet degree n-k
    Hinv = ext.hodge_inverse_matrix(n - 1, n - k).T  # facet degree n-k -> k-1
    return side.sign * (H @ P @ Hinv)


def trace_values(w: PolyDiffForm, mesh: SimplicialMesh, f: int, s: int, kind: str, degree: int):
    """Trace values at the facet quadrature points of exactness ``degree``.

    Returns (..., q, C(n-1, j)) with j = k (tangential) or k - 1 (normal).
    """
    x, _, _ = mesh.geometry[f].quadrature(degree)
    vals = w(x)
    M = tangential_map(mesh, f, w.k) if kind == "tan" else normal_map(mesh, f, s, w.k)
    if vals.shape[-1] == 0:
        return np.zeros(vals.shape[:-1] + (M.shape[1],))
    return vals @ M


def _trace(w, mesh, f, s, kind):
    geom = mesh.geometry[f]
    j = w.k if kind == "tan" else w.k - 1
    if j < 0 or j > geom.m:
        raise ValueError(f"{kind} trace of a {w.k}-form is identically zero on facets")
    vals = trace_values(w, mesh, f, s, kind, 2 * w.r)
    return FacetPolyForm(geom, j, w.r, facet_fit(geom, j, w.r, vals), f, s)


def trace_tan(w: PolyDiffForm, mesh: SimplicialMesh, f: int, s: int) -> FacetPolyForm:
    return _trace(w, mesh, f, s, "tan")


def trace_nor(w: PolyDiffForm, mesh: SimplicialMesh, f: int, s: int) -> FacetPolyForm:
    return _trace(w, mesh, f, s, "nor")


# ----------------------------------------------------------------------
# L2 pairings

def _gram(va, vb, w):
    """sum_q w_q <a_q, b_q> with separate batch axes for a and b."""
    A = va.reshape((-1,) + va.shape[-2:])
    B = vb.reshape((-1,) + vb.shape[-2:])
    G = np.einsum("aqc,q,bqc->ab", A, w, B)
    return G.reshape(va.shape[:-2] + vb.shape[:-2])


def l2_cell(a: PolyDiffForm, b: PolyDiffForm, degree=None):
    if a.k != b.k:
        raise ValueError("L2 pairing needs equal degrees")
    need = a.r + b.r
    if degree is None:
        degree = need
    elif degree < need:
        raise ConfigurationError(f"quadrature exactness {degree} < {need} required for orders {a.r}, {b.r}")
    x, w = a.simplex.quadrature(degree)
    return _gram(a(x), b(x), w)


def l2_facet(a: FacetPolyForm, b: FacetPolyForm, degree=None):
    if a.k != b.k:
        raise ValueError("facet L2 pairing needs equal degrees")
    need = a.r + b.r
    if degree is None:
        degree = need
    elif degree < need:
        raise ConfigurationError(f"quadrature exactness {degree} < {need} required for orders {a.r}, {b.r}")
    _, s, w = a.geom.quadrature(degree)
    return _gram(a(s), b(s), w)
