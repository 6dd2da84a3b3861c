"""Conforming simplicial meshes in R^n with facet sides and boundary frames."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from math import factorial, sqrt

import numpy as np

from .quadrature import mapped_rule


class MeshError(ValueError):
    pass


class Simplex:
    """A physical n-simplex in R^n (the geometry every cell basis is built on)."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise MeshError(f"an n-simplex in R^n needs n+1 points, got shape {v.shape}")
        self.vertices = v
        self.n = v.shape[1]
        self.centroid = v.mean(axis=0)
        edges = [np.linalg.norm(v[i] - v[j]) for i in range(len(v)) for j in range(i)]
        self.diameter = max(edges) if edges else 1.0
        self.signed_volume = np.linalg.det((v[1:] - v[0]).T) / factorial(self.n)
        self.volume = abs(self.signed_volume)
        self._rules = {}

    def quadrature(self, degree: int):
        if degree not in self._rules:
            self._rules[degree] = mapped_rule(self.vertices, degree)
        return self._rules[degree]

    def local_coords(self, x):
        return (np.asarray(x, dtype=float) - self.centroid) / self.diameter


class FacetGeometry:
    """An (n-1)-simplex in R^n with its canonical tangential frame.

    The frame comes from the sorted vertex tuple: Gram-Schmidt of the edge
    vectors from the lowest-numbered vertex, with a positive-diagonal QR so
    that it is deterministic.  Facet coordinates are s = T^T (x - centroid).
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        self.vertices = v
        self.n = v.shape[1]
        self.m = self.n - 1
        self.centroid = v.mean(axis=0)
        if self.m == 0:
            self.frame = np.zeros((self.n, 0))
            self.measure = 1.0
            self.diameter = 1.0
        else:
            E = (v[1:] - v[0]).T
            Q, R = np.linalg.qr(E)
            sgn = np.sign(np.diag(R))
            sgn[sgn == 0] = 1.0
            self.frame = Q * sgn
            self.measure = sqrt(abs(np.linalg.det(E.T @ E))) / factorial(self.m)
            self.diameter = max(np.linalg.norm(v[i] - v[j]) for i in range(len(v)) for j in range(i))
        self._rules = {}

    def quadrature(self, degree: int):
        """Points in R^n, facet coordinates s, and weights."""
        if degree not in self._rules:
            x, w = mapped_rule(self.vertices, degree)
            s = (x - self.centroid) @ self.frame
            self._rules[degree] = (x, s, w)
        return self._rules[degree]

    def local_coords(self, s):
        return np.asarray(s, dtype=float) / self.diameter


@dataclass
class FacetSide:
    """One side (e, K) of a facet: outward normal from K and orientation sign.

    ``sign`` is +1 when (normal, t_1, ..., t_{n-1}) is positively oriented
    for the canonical frame t, i.e. when the orientation induced by K
    agrees with the canonical one.
    """
    facet: int
    side: int
    cell: int
    local: int
    normal: np.ndarray
    sign: int


@dataclass
class Facet:
    id: int
    vertices: tuple
    sides: list = field(default_factory=list)  # (cell, local facet index)

    @property
    def boundary(self) -> bool:
        return len(self.sides) == 1


@dataclass
class FacetFrame:
    facet: int
    tangents: np.ndarray
    normals: list
    signs: list


class SimplicialMesh:
    def __init__(self, vertices, cells):
        V = np.asarray(vertices, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        C = np.asarray(cells, dtype=int)
        if V.ndim != 2:
            raise MeshError("vertices must be a list of points")
        n = V.shape[1]
        if n not in (1, 2, 3):
            raise MeshError(f"ambient dimension {n} not supported (1, 2 or 3)")
        if C.ndim != 2 or C.shape[1] != n + 1:
            raise MeshError(f"cells must be ({n + 1})-tuples of vertex ids")
        for c, cell in enumerate(C):
            bad = [i for i in cell if i < 0 or i >= len(V)]
            if bad:
                raise MeshError(f"cell {c} references missing vertex {bad[0]}")
            if len(set(cell.tolist())) != n + 1:
                raise MeshError(f"cell {c} repeats a vertex")
        self.n = n
        self.vertices = V
        self.cells = C
        self.simplices = []
        for c, cell in enumerate(C):
            S = Simplex(V[cell])
            if S.volume <= 1e-12 * S.diameter ** n:
                raise MeshError(f"cell {c} is degenerate (volume {S.volume:.3e})")
            self.simplices.append(S)
        self._build_facets()

    def _build_facets(self):
        n = self.n
        lookup = {}
        self.facets = []
        self.cell_facets = np.zeros((len(self.cells), n + 1), dtype=int)
        for c, cell in enumerate(self.cells):
            for i in range(n + 1):
                key = tuple(sorted(int(v) for j, v in enumerate(cell) if j != i))
                if key not in lookup:
                    lookup[key] = len(self.facets)
                    self.facets.append(Facet(len(self.facets), key))
                f = lookup[key]
                if len(self.facets[f].sides) == 2:
                    raise MeshError(f"facet {key} is shared by more than two cells (cell {c})")
                self.facets[f].sides.append((c, i))
                self.cell_facets[c, i] = f
        self.facet_lookup = lookup
        self.geometry = [FacetGeometry(self.vertices[list(f.vertices)]) for f in self.facets]
        self.sides = {}
        for f in self.facets:
            G = self.geometry[f.id]
            for s, (c, i) in enumerate(f.sides):
                opposite = self.vertices[self.cells[c, i]]
                d = G.centroid - opposite
                d = d - G.frame @ (G.frame.T @ d)
                nu = d / np.linalg.norm(d)
                sign = int(np.sign(np.linalg.det(np.column_stack([nu, G.frame]))))
                self.sides[(f.id, s)] = FacetSide(f.id, s, c, i, nu, sign)

    # ------------------------------------------------------------------
    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_facets(self):
        return len(self.facets)

    def interior_facets(self):
        return [f.id for f in self.facets if not f.boundary]

    def boundary_facets(self):
        return [f.id for f in self.facets if f.boundary]

    def cell_sides(self, c):
        """Facet-sides (facet id, side index) making up the boundary of cell c."""
        out = []
        for f in self.cell_facets[c]:
            for s, (cc, _) in enumerate(self.facets[f].sides):
                if cc == c:
                    out.append((int(f), s))
        return out

    def all_sides(self):
        return [(f.id, s) for f in self.facets for s in range(len(f.sides))]

    def other_side(self, f, s):
        return None if self.facets[f].boundary else (f, 1 - s)

    def frame(self, f) -> FacetFrame:
        G = self.geometry[f]
        sides = [self.sides[(f, s)] for s in range(len(self.facets[f].sides))]
        return FacetFrame(f, G.frame, [sd.normal for sd in sides], [sd.sign for sd in sides])

    def region_boundary(self, cells):
        cells = set(int(c) for c in cells)
        if not cells:
            raise ValueError("region must contain at least one cell")
        out = []
        for f in self.facets:
            inside = [s for s, (c, _) in enumerate(f.sides) if c in cells]
            if len(inside) == 1:
                out.append((f.id, inside[0]))
        return out

    # ------------------------------------------------------------------
    def to_json(self) -> dict:
        return {"n": self.n, "vertices": self.vertices.tolist(), "cells": self.cells.tolist()}

    def __repr__(self):
        return f"SimplicialMesh(n={self.n}, cells={self.num_cells}, facets={self.num_facets})"


def build_mesh(vertices, cells) -> SimplicialMesh:
    return SimplicialMesh(vertices, cells)


def region_boundary(mesh: SimplicialMesh, cells):
    return mesh.region_boundary(cells)


def mesh_from_json(data: dict) -> SimplicialMesh:
    for key in ("n", "vertices", "cells"):
        if key not in data:
            raise MeshError(f"mesh JSON lacks the '{key}' entry")
    n = int(data["n"])
    for i, v in enumerate(data["vertices"]):
        if len(v) != n:
            raise MeshError(f"vertex {i} has {len(v)} coordinates, expected {n}")
    for c, cell in enumerate(data["cells"]):
        if len(cell) != n + 1:
            raise MeshError(f"cell {c} has {len(cell)} vertices, expected {n + 1}")
    vertices = np.array(data["vertices"], dtype=float).reshape(-1, n)
    return SimplicialMesh(vertices, data["cells"])


def load_mesh(path) -> SimplicialMesh:
    with open(path) as fh:
        return mesh_from_json(json.load(fh))


def save_mesh(mesh: SimplicialMesh, path):
    with open(path, "w") as fh:
        json.dump(mesh.to_json(), fh)


# ----------------------------------------------------------------------
# structured helpers

def interval_mesh(ncells=2, a=0.0, b=1.0) -> SimplicialMesh:
    x = np.linspace(a, b, ncells + 1)[:, None]
    return SimplicialMesh(x, [[i, i + 1] for i in range(ncells)])


def square_mesh(m=1, size=1.0) -> SimplicialMesh:
    """[0, size]^2 cut into m x m squares, each split along its diagonal: 2 m^2 triangles."""
    x = np.linspace(0.0, size, m + 1)
    verts = np.array([[xi, yj] for yj in x for xi in x])
    vid = lambda i, j: j * (m + 1) + i
    cells = []
    for j in range(m):
        for i in range(m):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells += [[a, b, c], [a, c, d]]
    return SimplicialMesh(verts, cells)


def cube_mesh(m=1, size=1.0) -> SimplicialMesh:
    """[0, size]^3 cut into m^3 cubes, each split into 6 Kuhn tetrahedra."""
    x = np.linspace(0.0, size, m + 1)
    verts = np.array([[xi, yj, zk] for zk in x for yj in x for xi in x])
    vid = lambda i, j, k: (k * (m + 1) + j) * (m + 1) + i
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    cells = []
    for k, j, i in product(range(m), repeat=3):
        for p in perms:
            cur = [i, j, k]
            tet = [vid(*cur)]
            for axis in p:
                cur[axis] += 1
                tet.append(vid(*cur))
            cells.append(tet)
    return SimplicialMesh(verts, cells)


def reference_simplex_mesh(n) -> SimplicialMesh:
    verts = np.vstack([np.zeros(n), np.eye(n)])
    return SimplicialMesh(verts, [list(range(n + 1))])


def regular_simplex(n, edge=1.0) -> np.ndarray:
    """Vertices of a regular n-simplex with the given edge length.

    The first n vertices span the hyperplane x_n = 0, so the facet opposite
    the last vertex lies in that hyperplane.
    """
    if n == 0:
        return np.zeros((1, 0))
    base = regular_simplex(n - 1, edge)
    base = np.hstack([base, np.zeros((n, 1))])
    c = base.mean(axis=0)
    r2 = np.sum((base[0] - c) ** 2)
    apex = c.copy()
    apex[-1] = sqrt(edge ** 2 - r2)
    return np.vstack([base, apex])


def equilateral_pair(n, edge=1.0) -> SimplicialMesh:
    """Two regular n-simplices sharing a facet, mirror images across it."""
    T = regular_simplex(n, edge)
    mirror = T[-1].copy()
    mirror[-1] = -mirror[-1]
    verts = np.vstack([T, mirror])
    return SimplicialMesh(verts, [list(range(n + 1)), list(range(n)) + [n + 1]])


def two_cell_mesh(n) -> SimplicialMesh:
    if n == 1:
        return interval_mesh(2)
    if n == 2:
        return square_mesh(1)
    return equilateral_pair(3)


def eight_cell_mesh(n) -> SimplicialMesh:
    if n == 1:
        return interval_mesh(8)
    if n == 2:
        return square_mesh(2)
    raise ValueError("eight-cell helper is provided for n = 1, 2")
