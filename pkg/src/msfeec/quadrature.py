"""Simplex quadrature by collapsed (conical product) Gauss-Jacobi rules.

The rule on the reference simplex {x_i >= 0, sum x_i <= 1} in R^m is the
tensor product of 1D Gauss-Jacobi rules in collapsed coordinates
x_1 = u_1, x_2 = (1 - u_1) u_2, ...; the Jacobian factors (1 - u_i)^(m-i)
are absorbed into the Jacobi weights, so a rule with N points per
direction is exact for total degree 2N - 1.  Weights are positive.
"""
from __future__ import annotations

from functools import lru_cache
from math import ceil, factorial

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _gauss_jacobi01(npts: int, alpha: int):
    """Nodes/weights on [0, 1] for the weight (1 - u)^alpha."""
    t, w = roots_jacobi(npts, alpha, 0)
    return (1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def reference_rule(m: int, degree: int):
    """Points (q, m) and weights (q,) on the reference m-simplex, exact to ``degree``."""
    if m == 0:
        return np.zeros((1, 0)), np.ones(1)
    npts = max(1, ceil((degree + 1) / 2))
    rules = [_gauss_jacobi01(npts, m - 1 - i) for i in range(m)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    x = np.empty_like(u)
    rest = np.ones(len(u))
    for i in range(m):
        x[:, i] = rest * u[:, i]
        rest = rest * (1.0 - u[:, i])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def reference_volume(m: int) -> float:
    return 1.0 / factorial(m)


def mapped_rule(vertices: np.ndarray, degree: int):
    """Rule on the simplex with the given (m+1) vertices embedded in R^n.

    Weights are scaled by the m-dimensional measure ratio, so the simplex
    may be a facet (m < n).
    """
    vertices = np.asarray(vertices, dtype=float)
    m = vertices.shape[0] - 1
    xr, wr = reference_rule(m, degree)
    E = (vertices[1:] - vertices[0]).T  # (n, m)
    pts = vertices[0] + xr @ E.T
    if m == 0:
        return pts, wr.copy()
    jac = np.sqrt(abs(np.linalg.det(E.T @ E)))
    return pts, wr * jac
