"""Broken spaces, facet trace spaces and the jump/average/bracket calculus.

Facet fields are graded: every facet-side carries one FacetPolyForm per
facet degree, all expressed in the canonical frame of the facet.  Normal
traces already include the orientation sign of their side, so a smooth
form has normal traces that are negatives of each other across a facet
and tangential traces that agree.

Conventions (own side minus/plus the other side, with one half):

================  ======================  ===============
quantity          interior facet          boundary facet
================  ======================  ===============
normal jump       (own + other) / 2       0
normal average    (own - other) / 2       own
tangential jump   (own - other) / 2       own
tangential avg    (own + other) / 2       0
================  ======================  ===============
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exterior as ext
from .mesh import SimplicialMesh
from .polyforms import (ConfigurationError, FacetPolyForm, FormSpaceSpec, PolyDiffForm, basis_stack,
                        l2_facet, monomial_values, num_monomials, trace_nor, trace_tan)

TANGENTIAL = "tan"
NORMAL = "nor"
_ROLE = {"tan": TANGENTIAL, "tangential": TANGENTIAL, "nor": NORMAL, "normal": NORMAL}


def _role(role):
    try:
        return _ROLE[role]
    except KeyError:
        raise ValueError(f"role must be tangential or normal, got {role!r}") from None


# ----------------------------------------------------------------------
# facet fields

class FacetField:
    """Graded facet form on a set of facet-sides: data[(f, s)][j] -> FacetPolyForm."""

    def __init__(self, mesh: SimplicialMesh, data=None):
        self.mesh = mesh
        self.data = {} if data is None else {key: dict(v) for key, v in data.items()}

    def set(self, f, s, form: FacetPolyForm):
        self.data.setdefault((f, s), {})[form.k] = form

    def get(self, f, s, j):
        return self.data.get((f, s), {}).get(j)

    def sides(self):
        return sorted(self.data)

    def degrees(self):
        return sorted({j for v in self.data.values() for j in v})

    def copy(self):
        return FacetField(self.mesh, self.data)

    def _binary(self, other, sa, sb):
        out = FacetField(self.mesh)
        for key in set(self.data) | set(other.data):
            a, b = self.data.get(key, {}), other.data.get(key, {})
            for j in set(a) | set(b):
                if j in a and j in b:
                    out.set(*key, a[j]._combine(b[j], sa, sb))
                elif j in a:
                    out.set(*key, sa * a[j])
                else:
                    out.set(*key, sb * b[j])
        return out

    def __add__(self, other):
        return self._binary(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._binary(other, 1.0, -1.0)

    def __mul__(self, c):
        return FacetField(self.mesh, {key: {j: c * form for j, form in v.items()} for key, v in self.data.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def restrict(self, sides):
        sides = set(sides)
        return FacetField(self.mesh, {key: v for key, v in self.data.items() if key in sides})

    def norm(self, sides=None) -> float:
        return float(np.sqrt(max(pair(self, self, sides), 0.0)))

    def side_norms(self) -> dict:
        return {key: float(np.sqrt(max(sum(float(l2_facet(a, a)) for a in v.values()), 0.0)))
                for key, v in self.data.items()}

    def to_json(self) -> dict:
        out = []
        for (f, s), v in sorted(self.data.items()):
            out.append({"facet": int(f), "side": int(s),
                        "degrees": {str(j): {"order": form.r, "coeffs": form.coeffs.tolist()}
                                    for j, form in sorted(v.items())}})
        return {"n": self.mesh.n, "sides": out}

    @classmethod
    def from_json(cls, mesh: SimplicialMesh, data: dict) -> "FacetField":
        out = cls(mesh)
        if int(data.get("n", mesh.n)) != mesh.n:
            raise ValueError("facet field dimension does not match the mesh")
        for entry in data["sides"]:
            f, s = int(entry["facet"]), int(entry["side"])
            if f < 0 or f >= mesh.num_facets or (f, s) not in mesh.sides:
                raise ValueError(f"facet-side ({f}, {s}) does not exist in the mesh")
            for j, d in entry["degrees"].items():
                out.set(f, s, FacetPolyForm(mesh.geometry[f], int(j), int(d["order"]),
                                            np.asarray(d["coeffs"], dtype=float), f, s))
        return out


@dataclass
class TracePair:
    """Tangential and normal facet fields of one graded form (w^tan, w^nor)."""
    tan: FacetField
    nor: FacetField

    def __sub__(self, other):
        return TracePair(self.tan - other.tan, self.nor - other.nor)

    def __add__(self, other):
        return TracePair(self.tan + other.tan, self.nor + other.nor)

    def __mul__(self, c):
        return TracePair(c * self.tan, c * self.nor)

    __rmul__ = __mul__

    def norm(self, sides=None) -> float:
        return float(np.sqrt(self.tan.norm(sides) ** 2 + self.nor.norm(sides) ** 2))


def _combine_sides(field: FacetField, interior, boundary):
    """Apply interior(own, other) / boundary(own) per side and degree."""
    mesh = field.mesh
    out = FacetField(mesh)
    for (f, s), v in field.data.items():
        other = mesh.other_side(f, s)
        for j, own in v.items():
            if other is None:
                res = boundary(own)
            else:
                oth = field.get(*other, j)
                if oth is None:
                    oth = FacetPolyForm.zeros(own.geom, j, own.r, f, 1 - s)
                res = interior(own, oth)
            if res is not None:
                res = FacetPolyForm(res.geom, res.k, res.r, res.coeffs, f, s)
                out.set(f, s, res)
    return out


def _zero_like(form):
    return FacetPolyForm.zeros(form.geom, form.k, form.r, form.facet, form.side)


def jump(field: FacetField, role) -> FacetField:
    if _role(role) == NORMAL:
        return _combine_sides(field, lambda a, b: 0.5 * (a + b), _zero_like)
    return _combine_sides(field, lambda a, b: 0.5 * (a - b), lambda a: 1.0 * a)


def average(field: FacetField, role) -> FacetField:
    if _role(role) == NORMAL:
        return _combine_sides(field, lambda a, b: 0.5 * (a - b), lambda a: 1.0 * a)
    return _combine_sides(field, lambda a, b: 0.5 * (a + b), _zero_like)


def pair(a: FacetField, b: FacetField, sides=None) -> float:
    """sum over facet-sides and matching facet degrees of the L2 facet pairing."""
    keys = set(a.data) & set(b.data)
    if sides is not None:
        keys &= set(sides)
    total = 0.0
    for key in keys:
        da, db = a.data[key], b.data[key]
        for j in set(da) & set(db):
            total += float(l2_facet(da[j], db[j]))
    return total


def bracket(w1: TracePair, w2: TracePair, sides=None) -> float:
    """[w1, w2] = <w1^tan, w2^nor> - <w2^tan, w1^nor> over the given facet-sides."""
    return pair(w1.tan, w2.nor, sides) - pair(w2.tan, w1.nor, sides)


def bracket_per_cell(w1: TracePair, w2: TracePair) -> np.ndarray:
    mesh = w1.tan.mesh
    return np.array([bracket(w1, w2, mesh.cell_sides(c)) for c in range(mesh.num_cells)])


def form_traces(forms: dict, mesh: SimplicialMesh, sides=None) -> TracePair:
    """Trace pair of a graded form given as {(cell, degree): PolyDiffForm}."""
    tan, nor = FacetField(mesh), FacetField(mesh)
    cells = {c for c, _ in forms}
    for c in cells:
        for f, s in mesh.cell_sides(c):
            if sides is not None and (f, s) not in sides:
                continue
            for (cc, j), w in forms.items():
                if cc != c:
                    continue
                if j <= mesh.n - 1:
                    tan.set(f, s, trace_tan(w, mesh, f, s))
                if j >= 1:
                    nor.set(f, s, trace_nor(w, mesh, f, s))
    return TracePair(tan, nor)


# ----------------------------------------------------------------------
# broken space

def _normalize_specs(specs):
    out = {}
    for j, sp in specs.items():
        if isinstance(sp, FormSpaceSpec):
            out[int(j)] = sp
        else:
            fam, r = sp
            out[int(j)] = FormSpaceSpec(fam, int(r), int(j))
    return out


class BrokenSpace:
    """W_h = product over cells of W_h(K); the same FormSpaceSpec per degree on every cell.

    Global layout: for each cell in order, for each active degree in
    ascending order, a contiguous block of that cell's basis coefficients.
    """

    def __init__(self, mesh: SimplicialMesh, specs: dict):
        self.mesh = mesh
        self.specs = _normalize_specs(specs)
        for j, sp in self.specs.items():
            if sp.k != j:
                raise ConfigurationError(f"space for degree {j} declares degree {sp.k}")
            if not 0 <= j <= mesh.n:
                raise ConfigurationError(f"degree {j} out of range for n={mesh.n}")
        self.degrees = tuple(sorted(self.specs))
        self.offsets = {}
        pos = 0
        for c in range(mesh.num_cells):
            for j in self.degrees:
                size = self.specs[j].dimension(mesh.n)
                self.offsets[(c, j)] = (pos, pos + size)
                pos += size
        self.dim = pos
        self._basis = {}

    def order(self, j) -> int:
        return self.specs[j].order if j in self.specs else -1

    def local_dim(self, j) -> int:
        return self.specs[j].dimension(self.mesh.n)

    def block(self, c, j) -> slice:
        a, b = self.offsets[(c, j)]
        return slice(a, b)

    def cell_block(self, c) -> slice:
        return slice(self.offsets[(c, self.degrees[0])][0], self.offsets[(c, self.degrees[-1])][1])

    def basis(self, c, j) -> PolyDiffForm:
        key = (c, j)
        if key not in self._basis:
            self._basis[key] = basis_stack(self.specs[j], self.mesh.simplices[c], c)
        return self._basis[key]

    def form(self, vec, c, j) -> PolyDiffForm:
        B = self.basis(c, j)
        coeffs = np.einsum("b,bmc->mc", np.asarray(vec)[self.block(c, j)], B.coeffs)
        return PolyDiffForm(B.simplex, j, B.r, coeffs, c)

    def forms(self, vec) -> dict:
        return {(c, j): self.form(vec, c, j) for c in range(self.mesh.num_cells) for j in self.degrees}

    def project(self, func, degree_funcs: dict | None = None) -> np.ndarray:
        """L2 projection of a graded function func(x) -> (q, 2^n) onto W_h."""
        from .problems import degree_slices
        sl = degree_slices(self.mesh.n)
        vec = np.zeros(self.dim)
        for c in range(self.mesh.num_cells):
            S = self.mesh.simplices[c]
            for j in self.degrees:
                B = self.basis(c, j)
                x, w = S.quadrature(2 * B.r + 4)
                V = B(x)
                G = np.einsum("aqc,q,bqc->ab", V, w, V)
                rhs = np.einsum("aqc,q,qc->a", V, w, np.asarray(func(x))[:, sl[j]])
                vec[self.block(c, j)] = np.linalg.solve(G, rhs)
        return vec

    def traces(self, vec, sides=None) -> TracePair:
        return form_traces(self.forms(vec), self.mesh, sides)


# ----------------------------------------------------------------------
# trace spaces

def facet_basis_values(mesh: SimplicialMesh, f: int, j: int, r: int, degree: int) -> np.ndarray:
    """(dim P_r * C(m, j), q, C(m, j)) values of the facet basis monomial x dx^J."""
    geom = mesh.geometry[f]
    _, s, _ = geom.quadrature(degree)
    V = monomial_values(geom.m, r, geom.local_coords(s))  # (q, N)
    C = ext.dim(geom.m, j)
    out = np.einsum("qa,cd->acqd", V, np.eye(C))
    return out.reshape(V.shape[1] * C, len(s), C)


def facet_form_from_vec(mesh, f, s, j, r, vec) -> FacetPolyForm:
    geom = mesh.geometry[f]
    C = ext.dim(geom.m, j)
    return FacetPolyForm(geom, j, r, np.asarray(vec, dtype=float).reshape(num_monomials(geom.m, r), C), f, s)


class TraceSpace:
    """Facet trace space with a DOF table in canonical facet frames.

    ``orders`` maps facet degree j to the polynomial order on every facet.
    A single-valued space stores one block per facet; expanding to sides
    copies the block (tangential) or copies it with sign +1 on side 0 and
    -1 on side 1 (normal, side 0 plays the role of e+).  ``include_boundary``
    False drops boundary facets (the V-ring subspace).
    """

    def __init__(self, mesh: SimplicialMesh, role, orders: dict, single_valued=True, include_boundary=True):
        self.mesh = mesh
        self.role = _role(role)
        self.orders = {int(j): int(r) for j, r in orders.items()}
        for j in self.orders:
            if not 0 <= j <= mesh.n - 1:
                raise ConfigurationError(f"facet degree {j} out of range for n={mesh.n}")
        self.single_valued = bool(single_valued)
        self.include_boundary = bool(include_boundary)
        self.facets = [f.id for f in mesh.facets if include_boundary or not f.boundary]
        self.offsets = {}
        pos = 0
        for f in self.facets:
            nsides = 1 if self.single_valued else len(mesh.facets[f].sides)
            for s in range(nsides):
                for j in sorted(self.orders):
                    size = self.block_dim(j)
                    key = (f, j) if self.single_valued else (f, s, j)
                    self.offsets[key] = (pos, pos + size)
                    pos += size
        self.dim = pos

    def block_dim(self, j) -> int:
        return num_monomials(self.mesh.n - 1, self.orders[j]) * ext.dim(self.mesh.n - 1, j)

    def side_sign(self, s) -> float:
        return -1.0 if (self.role == NORMAL and s == 1) else 1.0

    def block(self, f, j, s=None):
        key = (f, j) if self.single_valued else (f, s, j)
        a, b = self.offsets[key]
        return slice(a, b)

    def expand(self, vec) -> FacetField:
        vec = np.asarray(vec, dtype=float)
        out = FacetField(self.mesh)
        for f in self.facets:
            for s in range(len(self.mesh.facets[f].sides)):
                for j, r in self.orders.items():
                    if self.single_valued:
                        v = self.side_sign(s) * vec[self.block(f, j)]
                    else:
                        v = vec[self.block(f, j, s)]
                    out.set(f, s, facet_form_from_vec(self.mesh, f, s, j, r, v))
        return out

    def interpolate(self, field: FacetField) -> np.ndarray:
        """Coefficients of the L2 projection of a field (side 0 value for single-valued spaces)."""
        from .polyforms import facet_fit
        vec = np.zeros(self.dim)
        for f in self.facets:
            geom = self.mesh.geometry[f]
            sides = [0] if self.single_valued else range(len(self.mesh.facets[f].sides))
            for s in sides:
                for j, r in self.orders.items():
                    form = field.get(f, s, j)
                    if form is None:
                        continue
                    deg = 2 * max(r, form.r)
                    _, pts, _ = geom.quadrature(deg)
                    c = facet_fit(geom, j, r, form(pts), deg)
                    c = self.side_sign(s) * c if self.single_valued else c
                    vec[self.block(f, j, s)] = c.ravel()
        return vec

    def is_member(self, field: FacetField, tol=1e-10) -> bool:
        """Membership of a side-wise field: single-valuedness and vanishing boundary values."""
        jf = jump(field, self.role)
        for (f, s), v in jf.data.items():
            if self.mesh.facets[f].boundary and self.include_boundary and self.role == TANGENTIAL:
                continue
            for form in v.values():
                if np.max(np.abs(form.coeffs), initial=0.0) > tol:
                    return False
        return True
