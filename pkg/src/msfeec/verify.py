"""Discrete first variations and the multisymplecticity checks built on them.

Every check produces an :class:`MSReport`.  An entry passes when
``|value| <= tol * scale``; ``scale`` is the product of the boundary trace
norms of the two variations, so verdicts do not depend on how the data
were normalized.  Entries that are only recorded (for instance the strong
bracket of a method that is not expected to be strongly conservative)
carry ``asserted=False`` and never fail a report.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.linalg import null_space

from .hybrid import (AFWSystem, FluxConfig, HybridSolution, NumericError, assemble, linearized)
from .mesh import SimplicialMesh, equilateral_pair
from .polyforms import ConfigurationError, codiff, ext_d, trace_values
from .problems import ProblemSpec, make_hodge_laplace, make_reciprocity_pair
from .spaces import TracePair, bracket, bracket_per_cell, jump

DEFAULT_TOL = 1e-10


# ----------------------------------------------------------------------
# reports

@dataclass
class MSEntry:
    check: str
    location: str
    value: float
    scale: float
    tol: float
    asserted: bool = True
    expect: str = "zero"          # "zero" or "nonzero"

    @property
    def ratio(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0 else float("inf") if self.value else 0.0

    @property
    def ok(self) -> bool:
        small = abs(self.value) <= self.tol * self.scale
        return small if self.expect == "zero" else not small

    @property
    def verdict(self) -> str:
        if not self.asserted:
            return "recorded"
        return "pass" if self.ok else "fail"

    def to_json(self) -> dict:
        return {"check": self.check, "location": self.location, "value": float(self.value),
                "scale": float(self.scale), "tol": float(self.tol), "expect": self.expect,
                "asserted": self.asserted, "verdict": self.verdict}


@dataclass
class MSReport:
    method: str = ""
    mesh: str = ""
    k: int | None = None
    entries: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, check, location, value, scale, tol, asserted=True, expect="zero") -> MSEntry:
        e = MSEntry(check, str(location), float(value), float(scale), float(tol), bool(asserted), expect)
        self.entries.append(e)
        return e

    def select(self, check) -> list:
        return [e for e in self.entries if e.check == check]

    def max_ratio(self, check=None) -> float:
        """Largest |value|/scale among the entries expected to vanish."""
        vals = [e.ratio for e in self.entries if e.expect == "zero" and (check is None or e.check == check)]
        return max(vals) if vals else 0.0

    def failures(self) -> list:
        return [e for e in self.entries if e.asserted and not e.ok]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def merge(self, other: "MSReport") -> "MSReport":
        out = MSReport(self.method, self.mesh, self.k, self.entries + other.entries,
                       sorted(set(self.flags) | set(other.flags)), {**self.metadata, **other.metadata})
        return out

    def to_json(self) -> dict:
        return {"method": self.method, "mesh": self.mesh, "k": self.k, "passed": self.passed,
                "flags": list(self.flags), "metadata": _jsonable(self.metadata),
                "entries": [e.to_json() for e in self.entries]}

    def csv_rows(self) -> list:
        return [[self.method, self.mesh, "" if self.k is None else self.k, e.check, e.location,
                 repr(float(e.value)), repr(float(e.tol * e.scale)), e.verdict] for e in self.entries]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(self.csv_rows())
        return buf.getvalue()


CSV_HEADER = ["method", "mesh", "k", "check", "location", "value", "tol", "verdict"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _describe(system) -> tuple:
    mesh = system.mesh
    return system.flux.variant, f"n{mesh.n}_cells{mesh.num_cells}", system.problem.k


# ----------------------------------------------------------------------
# variations

@dataclass
class VariationPair:
    """Two solutions of the homogeneous linearized system."""
    system: object
    first: HybridSolution
    second: HybridSolution
    seed: int
    data: tuple

    @property
    def zhat(self) -> tuple:
        return self.first.zhat, self.second.zhat

    @property
    def own(self) -> tuple:
        return self.first.traces(), self.second.traces()

    @property
    def residuals(self) -> tuple:
        return self.first.metadata.get("residual"), self.second.metadata.get("residual")

    @property
    def scale(self) -> float:
        a, b = self.zhat
        return a.norm() * b.norm()


def _is_frozen(system) -> bool:
    return getattr(system, "_frozen", None) is not None


def make_variations(system, seed: int = 0, base: HybridSolution | None = None, max_retries: int = 8,
                    data=None) -> VariationPair:
    """Two first variations with independent random boundary data of unit trace norm.

    Data that vanish after the compatibility projection are redrawn (up to
    ``max_retries`` times).

    ``system`` may be a plain system (it is linearized at ``base``, or at
    z = 0 when no base is given) or an already linearized one.  ``data``
    overrides the random boundary data with two explicit vectors.
    """
    lin = system if _is_frozen(system) else linearized(system, base)
    if lin.boundary_dim == 0 and data is None:
        raise ConfigurationError("the mesh has no boundary facets to carry variation data")
    rng = np.random.default_rng(seed)
    if data is None:
        for _ in range(max_retries):
            g = []
            for _ in range(2):
                gi = lin.random_boundary(rng)
                nrm = lin.boundary_field(gi).norm()
                g.append(gi / nrm if nrm > 1e-12 else gi * 0.0)
            if np.linalg.norm(g[0]) > 0 and np.linalg.norm(g[1]) > 0:
                break
        else:
            raise NumericError("boundary data kept falling in the kernel; no nonzero variation found")
    else:
        g = [lin.boundary_vector(d) for d in data]
    sols = tuple(lin.solve(gi) for gi in g)
    for sol in sols:
        # a one-dimensional admissible data space forces parallel variations
        sol.metadata["parallel_data"] = bool(abs(g[0] @ g[1]) >= (1 - 1e-8) * np.linalg.norm(g[0])
                                             * np.linalg.norm(g[1]))
    return VariationPair(lin, sols[0], sols[1], seed, tuple(g))


def null_space_variations(system, seed: int = 0, max_dofs: int = 500) -> VariationPair:
    """Cross-check: two random members of the SVD null space of the linearized equations."""
    lin = system if _is_frozen(system) else linearized(system)
    if lin.ndof > max_dofs:
        raise ConfigurationError(f"null-space extraction limited to {max_dofs} unknowns (got {lin.ndof})")
    rng = np.random.default_rng(seed)
    J = lin.jacobian(np.zeros(lin.ndof))
    if isinstance(lin, AFWSystem):
        Z = lin.N @ null_space(lin.N0.T @ J @ lin.N, rcond=1e-11)
    else:
        Z = null_space(J[lin.free], rcond=1e-11)
    if Z.shape[1] == 0:
        raise NumericError("the linearized system has no nontrivial solutions")
    sols = []
    for _ in range(2):
        x = Z @ rng.normal(size=Z.shape[1])
        x /= np.linalg.norm(x)
        sols.append(HybridSolution(lin, x, lin.recover(x), {"residual": 0.0, "source": "null_space"}))
    return VariationPair(lin, sols[0], sols[1], seed, (None, None))


# ----------------------------------------------------------------------
# multisymplecticity checks

def _fprime_flag(system, report):
    if system.problem.check_symmetry() > 1e-12:
        report.flags.append("nonsymmetric_fprime")
        return False
    return True


def local_ms(pair: VariationPair, tol: float = DEFAULT_TOL) -> MSReport:
    """Bracket [w1_hat, w2_hat] over the boundary of every cell."""
    rep = MSReport(*_describe(pair.system))
    sym = _fprime_flag(pair.system, rep)
    w1, w2 = pair.zhat
    scale = pair.scale
    for c, val in enumerate(bracket_per_cell(w1, w2)):
        rep.add("local_ms", f"cell{c}", val, scale, tol, asserted=sym)
    rep.metadata["solve_residuals"] = [float(r) for r in pair.residuals if r is not None]
    return rep


def random_regions(mesh: SimplicialMesh, count: int = 10, seed: int = 0) -> list:
    """The whole mesh plus ``count`` random nonempty cell subsets (deterministic)."""
    rng = np.random.default_rng(seed)
    nc = mesh.num_cells
    out = [tuple(range(nc))]
    for _ in range(count):
        size = int(rng.integers(1, nc + 1))
        out.append(tuple(sorted(int(c) for c in rng.choice(nc, size=size, replace=False))))
    return out


def strong_ms(pair: VariationPair, regions=None, tol: float = DEFAULT_TOL, seed: int = 0,
              count: int = 10) -> MSReport:
    """Bracket over the boundary of unions of cells.

    Asserted only when the assembled method is expected to be strongly
    conservative; otherwise the values are recorded.
    """
    system = pair.system
    mesh = system.mesh
    rep = MSReport(*_describe(system))
    sym = _fprime_flag(system, rep)
    expected = bool(getattr(system, "strong_conservativity_expected", None)) and sym
    regions = random_regions(mesh, count, seed) if regions is None else [tuple(r) for r in regions]
    w1, w2 = pair.zhat
    scale = pair.scale
    for reg in regions:
        val = bracket(w1, w2, mesh.region_boundary(reg))
        rep.add("strong_ms", "cells" + "-".join(map(str, reg)), val, scale, tol, asserted=expected)
    rep.metadata["strong_conservativity_expected"] = getattr(system, "strong_conservativity_expected", None)
    return rep


def jump_identity(pair: VariationPair, tol: float = DEFAULT_TOL) -> MSReport:
    """Per cell: [w1_hat - w1, w2_hat - w2] - [w1_hat, w2_hat]."""
    rep = MSReport(*_describe(pair.system))
    w1, w2 = pair.zhat
    o1, o2 = pair.own
    lhs = bracket_per_cell(w1 - o1, w2 - o2)
    rhs = bracket_per_cell(w1, w2)
    scale = pair.scale
    for c in range(len(lhs)):
        rep.add("jump_identity", f"cell{c}", lhs[c] - rhs[c], scale, tol)
    return rep


def conservativity(pair_or_solution, tol: float = DEFAULT_TOL) -> MSReport:
    """L2 norm of the normal jump of the hybrid normal trace on each interior facet.

    The tolerance is absolute (scale 1); variations carry unit-norm data.
    Asserted only for methods expected to be strongly conservative.
    """
    sols = ([pair_or_solution.first, pair_or_solution.second] if isinstance(pair_or_solution, VariationPair)
            else [pair_or_solution])
    system = sols[0].system
    rep = MSReport(*_describe(system))
    expected = bool(getattr(system, "strong_conservativity_expected", None))
    for i, sol in enumerate(sols):
        for f, val in sorted(sol.conservativity().items()):
            rep.add("conservativity", f"variation{i}-facet{f}", val, 1.0, tol, asserted=expected)
    return rep


def verify_system(system, seed: int = 0, tol: float = DEFAULT_TOL, base=None, count: int = 10) -> MSReport:
    """local_ms + jump_identity + strong_ms + conservativity for one system."""
    pair = make_variations(system, seed, base)
    rep = local_ms(pair, tol)
    for other in (jump_identity(pair, tol), strong_ms(pair, tol=tol, seed=seed, count=count),
                  conservativity(pair, tol)):
        rep = rep.merge(other)
    rep.metadata["scale"] = pair.scale
    return rep


# ----------------------------------------------------------------------
# reciprocity

def _volume_pairing(system, src, xa, xb, cells) -> float:
    """sum over cells of (src(x, w_a), w_b)."""
    total = 0.0
    for c in cells:
        xq, w, _, Za = system._zflat(xa, c)
        _, _, _, Zb = system._zflat(xb, c)
        total += float(np.einsum("q,qi,qi->", w, src(xq, Za), Zb))
    return total


def reciprocity(problem: ProblemSpec, mesh: SimplicialMesh, spaces: dict, flux: FluxConfig, g1, g2,
                region=None, seed: int = 0, base=None, tol: float = DEFAULT_TOL, data=None) -> MSReport:
    """Defect [w1_hat, w2_hat] - (g1(w1), w2) + (g2(w2), w1) over a region.

    The two linearized problems share the base state and differ in their
    incremental sources.  The boundary data are random (seeded) unless
    ``data`` gives them explicitly.
    """
    p1, p2 = make_reciprocity_pair(problem, g1, g2, base)
    s1, s2 = assemble(p1, mesh, spaces, flux), assemble(p2, mesh, spaces, flux)
    if data is None:
        rng = np.random.default_rng(seed)
        d1, d2 = s1.random_boundary(rng), s2.random_boundary(rng)
    else:
        d1, d2 = s1.boundary_vector(data[0]), s2.boundary_vector(data[1])
    sol1, sol2 = s1.solve(d1), s2.solve(d2)
    cells = tuple(range(mesh.num_cells)) if region is None else tuple(region)
    sides = mesh.region_boundary(cells)
    br = bracket(sol1.zhat, sol2.zhat, sides)
    v1 = _volume_pairing(s1, p1.incremental_source, sol1.x, sol2.x, cells)
    v2 = _volume_pairing(s2, p2.incremental_source, sol2.x, sol1.x, cells)
    defect = br - v1 + v2
    scale = sol1.zhat.norm() * sol2.zhat.norm()
    rep = MSReport(flux.variant, f"n{mesh.n}_cells{mesh.num_cells}", problem.k)
    rep.add("reciprocity", "cells" + "-".join(map(str, cells)), defect, scale, tol)
    rep.metadata.update({"bracket": br, "source_terms": [v1, v2], "defect": defect, "scale": scale,
                         "data": [d1, d2]})
    return rep


# ----------------------------------------------------------------------
# XG versus LDG-H

def _field_max(field_) -> float:
    vals = [float(np.max(np.abs(form.coeffs))) for v in field_.data.values() for form in v.values()
            if form.coeffs.size]
    return max(vals) if vals else 0.0


def xg_equivalence(problem: ProblemSpec, mesh: SimplicialMesh, spaces: dict, alpha=1.0, beta=None,
                   seed: int = 0, check_orders=None) -> dict:
    """Solve with XG and with LDG-H (matched trace orders and boundary data); compare.

    Requires alpha * beta = 1 (beta defaults to 1/alpha).  Returns the
    maximum coefficient discrepancy of z, z_hat^tan and z_hat^nor.
    """
    beta = 1.0 / alpha if beta is None else beta
    if abs(alpha * beta - 1.0) > 1e-12:
        raise ConfigurationError(f"XG/LDG-H equivalence needs alpha*beta = 1 (got {alpha * beta:g})")
    degrees = tuple(j for j in problem.active if j + 1 in problem.active and j <= mesh.n - 1)
    xg_flux = FluxConfig("XG", alpha={j: alpha for j in degrees}, beta={j: beta for j in degrees},
                         check_orders=check_orders or {})
    xg = assemble(problem, mesh, spaces, xg_flux)
    ldg = assemble(problem, mesh, spaces, FluxConfig("LDG_H", alpha={j: alpha for j in degrees},
                                                     orders=dict(xg.hat_orders)))
    g = xg.random_boundary(np.random.default_rng(seed))
    g /= max(xg.boundary_field(g).norm(), 1e-300)
    a, b = xg.solve(g), ldg.solve(g)
    dz = float(np.max(np.abs(a.z - b.z))) if a.z.size else 0.0
    dt = _field_max(a.zhat.tan - b.zhat.tan)
    dn = _field_max(a.zhat.nor - b.zhat.nor)
    return {"discrepancy": max(dz, dt, dn), "z": dz, "zhat_tan": dt, "zhat_nor": dn,
            "alpha": alpha, "beta": beta, "size": float(np.max(np.abs(b.z))) if b.z.size else 0.0}


# ----------------------------------------------------------------------
# one dimension: symplecticity

def vertex_symplectic_values(pair: VariationPair) -> list:
    """(x, omega) at every vertex from the hybrid traces, sorted by x.

    With z = q + p dt, q_hat is the tangential trace and p_hat = nu * z_hat^nor
    (nu the outward normal of the side the value is read from).
    """
    system = pair.system
    mesh = system.mesh
    if mesh.n != 1:
        raise ConfigurationError("symplectic_1d needs a one-dimensional mesh")
    w1, w2 = pair.zhat
    out = []
    for f in range(mesh.num_facets):
        geom = mesh.geometry[f]
        _, s, _ = geom.quadrature(1)
        side = 0
        nu = float(np.ravel(mesh.sides[(f, side)].normal)[0])
        q1 = float(w1.tan.get(f, side, 0)(s)[0, 0])
        q2 = float(w2.tan.get(f, side, 0)(s)[0, 0])
        p1 = nu * float(w1.nor.get(f, side, 0)(s)[0, 0])
        p2 = nu * float(w2.nor.get(f, side, 0)(s)[0, 0])
        out.append((float(geom.centroid[0]), q1 * p2 - q2 * p1))
    return sorted(out)


def symplectic_1d(system, seed: int = 0, tol: float = DEFAULT_TOL, base=None) -> MSReport:
    """omega(w1, w2) at every vertex; successive differences must vanish."""
    pair = make_variations(system, seed, base)
    vals = vertex_symplectic_values(pair)
    rep = MSReport(*_describe(pair.system))
    scale = pair.scale
    for (xa, oa), (xb, ob) in zip(vals, vals[1:]):
        rep.add("symplectic_1d", f"x{xa:.6g}->x{xb:.6g}", ob - oa, scale, tol)
    rep.metadata["omega"] = [v for _, v in vals]
    return rep


# ----------------------------------------------------------------------
# the CG-H counterexample

def _p1_cell_data(verts):
    """Gradients of barycentric coordinates and volume of a simplex."""
    n = verts.shape[1]
    T = np.hstack([np.ones((n + 1, 1)), verts])
    G = np.linalg.inv(T)[1:].T          # row a: grad lambda_a
    vol = abs(np.linalg.det((verts[1:] - verts[0]).T)) / factorial(n)
    return G, vol


def _facet_measure(pts):
    m = len(pts) - 1
    if m == 0:
        return 1.0
    E = (pts[1:] - pts[0]).T
    return float(np.sqrt(abs(np.linalg.det(E.T @ E)))) / factorial(m)


def cgh_literal(n: int, edge: float = 1.0) -> dict:
    """Direct evaluation of the two-simplex construction with P1 Lagrange elements.

    v1 = 1; eta2 equals 1 at the vertices of the shared facet e and -n at
    each opposite vertex; v2 solves the cellwise Riesz problem
    <eta2, v^tan> = (dv2, dv), orthogonal to constants.  Facet integrals
    of products of barycentric coordinates use the exact moment formula.
    Returns the per-cell and two-cell brackets and the trace norms.
    """
    mesh = equilateral_pair(n, edge)
    cells = [list(c) for c in mesh.cells]
    shared = set(cells[0]) & set(cells[1])
    m = n - 1
    per_cell, v2_cells, sq = [], [], {"v1": 0.0, "v2": 0.0, "eta2": 0.0}
    region = 0.0
    for c, cell in enumerate(cells):
        verts = mesh.vertices[cell]
        eta = np.array([1.0 if v in shared else -float(n) for v in cell])
        G, vol = _p1_cell_data(verts)
        K = vol * G @ G.T
        b = np.zeros(n + 1)
        facet_data = []
        for drop in range(n + 1):
            idx = [i for i in range(n + 1) if i != drop]
            area = _facet_measure(verts[idx])
            M = np.full((m + 1, m + 1), area / ((m + 1) * (m + 2)))
            M[np.diag_indices(m + 1)] *= 2.0
            b[idx] += M @ eta[idx]
            facet_data.append((idx, area, M, set(cell[i] for i in idx) == shared))
        v2 = np.linalg.pinv(K, rcond=1e-13) @ b
        v2_cells.append(dict(zip(cell, v2)))
        br = 0.0
        for idx, area, M, on_e in facet_data:
            flux = float(np.sum(M @ eta[idx]))          # <eta2, 1> over the facet
            br += flux
            if not on_e:
                region += flux
            sq["v1"] += area
            sq["v2"] += float(v2[idx] @ M @ v2[idx])
            sq["eta2"] += float(eta[idx] @ M @ eta[idx])
        per_cell.append(br)
    conforming = max(abs(v2_cells[0][v] - v2_cells[1][v]) for v in shared)
    e_measure = _facet_measure(mesh.vertices[sorted(shared)])
    scale = float(np.sqrt(sq["v1"]) * np.sqrt(sq["v2"] + sq["eta2"]))
    return {"per_cell": per_cell, "region": region, "scale": scale, "shared_measure": e_measure,
            "closed_form": -2.0 * e_measure, "v2_conformity": conforming, "v2": v2_cells, "mesh": mesh}


def cgh_counterexample(n: int, tol: float = DEFAULT_TOL, edge: float = 1.0) -> MSReport:
    """Weak but not strong multisymplecticity of AFW-H for k = 0 on two simplices.

    Runs the literal construction and the same variations through the AFW-H
    solver (boundary data = traces of v1 and v2), then compares.
    """
    lit = cgh_literal(n, edge)
    mesh = lit["mesh"]
    problem = make_hodge_laplace(n, 0)
    system = assemble(problem, mesh, {0: ("P", 1), 1: ("P", 0)}, FluxConfig("AFW_H"))

    def v2_func(x):
        out = np.zeros((len(x), 2 ** n))
        for i, p in enumerate(x):
            lam_best, val = None, 0.0
            for c, cell in enumerate(mesh.cells):
                lam = np.linalg.solve(np.hstack([np.ones((n + 1, 1)), mesh.vertices[list(cell)]]).T,
                                      np.concatenate([[1.0], p]))
                if lam_best is None or lam.min() > lam_best:
                    lam_best = lam.min()
                    val = float(sum(lam[a] * lit["v2"][c][v] for a, v in enumerate(cell)))
            out[i, 0] = val
        return out

    one = lambda x: np.concatenate([np.ones((len(x), 1)), np.zeros((len(x), 2 ** n - 1))], axis=1)
    pair = make_variations(system, data=(one, v2_func))
    w1, w2 = pair.zhat
    scale = pair.scale
    rep = MSReport("AFW_H", f"equilateral_pair_n{n}", 0)
    for c, val in enumerate(bracket_per_cell(w1, w2)):
        rep.add("cgh_local", f"cell{c}", val, scale, tol)
    region = bracket(w1, w2, mesh.region_boundary((0, 1)))
    rep.add("cgh_region", "cells0-1", region, scale, 1e6 * tol, expect="nonzero")
    rep.add("cgh_literal_local", "cells", max(abs(v) for v in lit["per_cell"]), lit["scale"], tol)
    rep.add("cgh_paths_agree", "region", region - lit["region"], abs(lit["region"]), 1e-9)
    rep.add("cgh_closed_form", "region", lit["region"] - lit["closed_form"], abs(lit["closed_form"]), 1e-9)
    rep.add("cgh_eta1_zero", "all", pair.first.zhat.nor.norm(), 1.0, tol)
    rep.add("cgh_v2_conforming", "e", lit["v2_conformity"], 1.0, tol)
    cons = pair.second.conservativity_norm()
    rep.add("cgh_conservativity", "e", cons, 1.0, tol, asserted=True, expect="nonzero")
    rep.metadata.update({"region_bracket": region, "literal_region_bracket": lit["region"],
                         "closed_form": lit["closed_form"], "scale": scale, "literal_scale": lit["scale"],
                         "shared_facet_measure": lit["shared_measure"], "conservativity": cons})
    return rep


# ----------------------------------------------------------------------
# IP-H primal form cross-check

def ip_primal_check(system, solution: HybridSolution | None = None, tol: float = DEFAULT_TOL) -> MSReport:
    """Residual of a_h(u_h, v) = (dF/du, v) for the IP-H primal variable.

    Valid with homogeneous tangential boundary data, a piecewise-constant
    single-valued penalty and beta = 1/alpha; the IP-H solution is obtained
    with zero boundary data when none is given.  This is a consistency
    check of the hybrid implementation, not a solver path.
    """
    if system.flux.variant != "IP_H":
        raise ConfigurationError("the primal form applies to IP_H only")
    if system.flux.penalty_form != "piecewise_constant":
        raise ConfigurationError("the primal form needs the piecewise-constant penalty")
    problem, mesh, sp = system.problem, system.mesh, system.space
    if problem.kind != "hodge_laplace_semilinear":
        raise ConfigurationError("the primal form is stated for the Hodge-Laplace problem")
    if solution is None:
        solution = system.solve(np.zeros(system.boundary_dim))
    n, k, qf = mesh.n, problem.k, system.qf
    x = solution.x
    nu = sp.local_dim(k)
    cells = mesh.num_cells
    A = np.zeros((cells * nu, cells * nu))
    blk = lambda c: slice(c * nu, (c + 1) * nu)
    for c in range(cells):
        S = mesh.simplices[c]
        xq, w = S.quadrature(system.qc)
        B = sp.basis(c, k)
        for op, ok in ((codiff, k >= 1), (ext_d, k < n)):
            if ok:
                V = op(B)(xq)
                A[blk(c), blk(c)] += np.einsum("aqc,q,bqc->ab", V, w, V)
    cache = {}

    def vals(f, s):
        if (f, s) not in cache:
            c = mesh.sides[(f, s)].cell
            B = sp.basis(c, k)
            d = {}
            if k >= 1:
                d["unor"] = trace_values(B, mesh, f, s, "nor", qf)
                d["dtan"] = trace_values(codiff(B), mesh, f, s, "tan", qf)
            if k < n:
                d["utan"] = trace_values(B, mesh, f, s, "tan", qf)
                d["dnor"] = trace_values(ext_d(B), mesh, f, s, "nor", qf)
            cache[(f, s)] = (c, d)
        return cache[(f, s)]

    def op(f, s, name, kind):
        """[(cell, coefficient, values)] for jump/average of a trace quantity on side (f, s)."""
        c, d = vals(f, s)
        other = mesh.other_side(f, s)
        role = "tan" if name in ("utan", "dtan") else "nor"
        if other is None:
            keep = (role, kind) in (("tan", "jump"), ("nor", "avg"))
            return [(c, 1.0, d[name])] if keep else []
        c2, d2 = vals(*other)
        sign = -0.5 if (role, kind) in (("tan", "jump"), ("nor", "avg")) else 0.5
        return [(c, 0.5, d[name]), (c2, sign, d2[name])]

    for (f, s) in mesh.all_sides():
        _, _, wq = mesh.geometry[f].quadrature(qf)
        terms = []
        if k >= 1:
            a, b = system.flux.alpha_of(k - 1, f, s), system.flux.beta_of(k - 1, f, s)
            terms += [(b, ("unor", "jump"), ("unor", "jump")), (-a, ("dtan", "jump"), ("dtan", "jump")),
                      (1.0, ("dtan", "avg"), ("unor", "jump")), (1.0, ("unor", "jump"), ("dtan", "avg"))]
        if k < n:
            a, b = system.flux.alpha_of(k, f, s), system.flux.beta_of(k, f, s)
            terms += [(-a, ("utan", "jump"), ("utan", "jump")), (b, ("dnor", "jump"), ("dnor", "jump")),
                      (-1.0, ("dnor", "avg"), ("utan", "jump")), (-1.0, ("utan", "jump"), ("dnor", "avg"))]
        for coef, trial, test in terms:
            for cu, su, U in op(f, s, *trial):
                for cv, sv, V in op(f, s, *test):
                    A[blk(cv), blk(cu)] += coef * su * sv * np.einsum("aqc,q,bqc->ab", V, wq, U)
    u = np.concatenate([x[sp.block(c, k)] for c in range(cells)])
    src = system.source_vector(x)
    rhs = np.concatenate([src[sp.block(c, k)] for c in range(cells)])
    r = A @ u - rhs
    scale = max(float(np.linalg.norm(A, 2) * np.linalg.norm(u) + np.linalg.norm(rhs)), 1e-300)
    rep = MSReport("IP_H", f"n{n}_cells{cells}", k)
    rep.add("ip_primal", "all", float(np.linalg.norm(r)), scale, tol)
    if not solution.metadata.get("converged", True):
        rep.flags.append("hybrid_solve_inconsistent")
    rep.metadata["primal_symmetry"] = float(np.max(np.abs(A - A.T)) / max(np.max(np.abs(A)), 1e-300))
    return rep


def to_json_text(reports) -> str:
    """Deterministic JSON for a {name: MSReport | dict} mapping."""
    data = {name: (r.to_json() if isinstance(r, MSReport) else _jsonable(r))
            for name, r in sorted(reports.items())}
    return json.dumps(data, indent=2, sort_keys=True)
