"""Assembly and solution of hybrid methods for Dz = f(x, z).

Unknowns are laid out in one global vector:

* the broken space W_h (every cell, every active degree),
* the single-valued tangential trace block (one block per facet and
  coupling degree, boundary facets included; boundary blocks are pinned
  to the essential data and moved to the right-hand side),
* for XG only, a single-valued normal block (side 0 plays e+).

Test functions mirror the unknowns, so the full operator is square.  On
each facet-side every relevant quantity (z^tan, z^nor, the hybrid traces
and the flux) is an affine map of the global vector evaluated at the
facet quadrature points; the weak forms are sums of L2 pairings of such
maps, which keeps all variants on one code path.

The coupling degrees are the facet degrees j with both j and j+1 active.
Only they carry hybrid traces, which matches the block structure of the
Hodge-Laplace problem (rho is broken) and of the full Hodge-Dirac problem.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, svd

from . import exterior as ext
from .mesh import SimplicialMesh
from .polyforms import (ConfigurationError, FacetPolyForm, codiff, ext_d, facet_fit, trace_values)
from .problems import ProblemSpec, degree_slices
from .spaces import (BrokenSpace, FacetField, TracePair, TraceSpace, facet_basis_values, jump)

VARIANTS = ("AFW_H", "LDG_H", "IP_H", "XG", "NC_H_REDUCED")
PENALTY_FORMS = ("piecewise_constant", "reduced_stabilization")


class NumericError(RuntimeError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


# ----------------------------------------------------------------------
# configuration

def _parse_table(value):
    """A penalty entry: scalar, or {(f, s) | f | "f:s" | "f" | "default": value}."""
    if isinstance(value, dict):
        table = {}
        for key, v in value.items():
            if isinstance(key, str) and key != "default":
                parts = key.split(":")
                key = (int(parts[0]), int(parts[1])) if len(parts) == 2 else int(parts[0])
            table[key] = float(v)
        return table
    return float(value)


@dataclass
class FluxConfig:
    """Method choice and penalty parameters.

    ``alpha`` and ``beta`` map a facet degree to a scalar or to a per-facet
    (or per facet-side) table.  ``orders`` gives the order of the hybrid
    tangential trace space per facet degree (default: the largest order
    among the traces it must contain).  ``check_orders`` is used by XG:
    {"nor": {j: r}, "tan": {j: r}}.
    """
    variant: str = "LDG_H"
    alpha: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)
    penalty_form: str = "piecewise_constant"
    orders: dict = field(default_factory=dict)
    check_orders: dict = field(default_factory=dict)
    quad_degree: int | None = None
    default_alpha: float = 1.0

    def __post_init__(self):
        self.variant = str(self.variant).upper().replace("-", "_")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.penalty_form not in PENALTY_FORMS:
            raise ConfigurationError(f"unknown penalty form {self.penalty_form!r}")
        self.alpha = {int(j): _parse_table(v) for j, v in self.alpha.items()}
        self.beta = {int(j): _parse_table(v) for j, v in self.beta.items()}
        self.orders = {int(j): int(r) for j, r in self.orders.items()}
        self.check_orders = {role: {int(j): int(r) for j, r in v.items()}
                             for role, v in self.check_orders.items()}

    @staticmethod
    def _lookup(entry, f, s, default):
        if entry is None:
            return default
        if isinstance(entry, dict):
            for key in ((f, s), f, "default"):
                if key in entry:
                    return entry[key]
            return default
        return entry

    def alpha_of(self, j, f, s) -> float:
        return self._lookup(self.alpha.get(j), f, s, self.default_alpha)

    def beta_of(self, j, f, s) -> float:
        if j in self.beta:
            return self._lookup(self.beta[j], f, s, 1.0)
        a = self.alpha_of(j, f, s)
        return 1.0 / a if a else 0.0

    @classmethod
    def from_json(cls, data: dict) -> "FluxConfig":
        known = {"variant", "alpha", "beta", "penalty_form", "orders", "check_orders", "quad_degree",
                 "default_alpha"}
        extra = set(data) - known - {"spaces", "family", "r"}
        if extra:
            raise ConfigurationError(f"unknown method keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_json(self) -> dict:
        def enc(table):
            out = {}
            for j, v in table.items():
                if isinstance(v, dict):
                    v = {(f"{k[0]}:{k[1]}" if isinstance(k, tuple) else str(k)): x for k, x in v.items()}
                out[str(j)] = v
            return out
        return {"variant": self.variant, "alpha": enc(self.alpha), "beta": enc(self.beta),
                "penalty_form": self.penalty_form, "orders": {str(j): r for j, r in self.orders.items()},
                "check_orders": {k: {str(j): r for j, r in v.items()} for k, v in self.check_orders.items()},
                "quad_degree": self.quad_degree, "default_alpha": self.default_alpha}


def equal_order_spaces(problem: ProblemSpec, r: int, family="P") -> dict:
    return {j: (family, r) for j in problem.active}


def afw_spaces(problem: ProblemSpec, r: int = 1, family="P") -> dict:
    """Stable conforming pair for Hodge-Laplace type problems.

    W^{k-1} = family_{r+1}, W^k = P_r (r >= 1) or P^-_{r+1}, and W^{k+1} =
    P_r, which contains d W^k.  ``family`` selects full ("P") or trimmed
    ("P-") spaces for the first two degrees.  Problems without a
    distinguished k (Hodge-Dirac, the 1D ODE) get the trimmed complex
    P^-_{r+1} in every degree.
    """
    k = problem.k
    if k is None or problem.kind in ("hodge_dirac_source",):
        return {j: ("P-", r + 1) for j in problem.active}
    out = {}
    if k - 1 in problem.active:
        out[k - 1] = (family, r + 1)
    out[k] = ("P", r) if (family == "P" and r >= 1) else ("P-", r + 1)
    if k + 1 in problem.active:
        out[k + 1] = ("P", max(r, 0))
    return out


def coupling_degrees(active, n) -> tuple:
    return tuple(j for j in range(n) if j in active and j + 1 in active)


# ----------------------------------------------------------------------
# affine maps of the global vector at facet quadrature points

class Lin:
    """sum over blocks (a, b) of x[a:b] contracted with values (b - a, q, C)."""

    def __init__(self, terms=None):
        self.terms = {} if terms is None else dict(terms)

    @classmethod
    def block(cls, sl: slice, values):
        return cls({(sl.start, sl.stop): np.asarray(values, dtype=float)})

    def __add__(self, other):
        out = Lin(self.terms)
        for key, v in other.terms.items():
            out.terms[key] = out.terms[key] + v if key in out.terms else v
        return out

    def __mul__(self, c):
        return Lin({key: c * v for key, v in self.terms.items()})

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def map(self, fn):
        return Lin({key: fn(v) for key, v in self.terms.items()})

    def eval(self, x, q, C):
        out = np.zeros((q, C))
        for (a, b), v in self.terms.items():
            out += np.einsum("b,bqc->qc", x[a:b], v)
        return out


def _pair_into(M, test: Lin, trial: Lin, w, scale=1.0):
    for (ra, rb), A in test.terms.items():
        for (ca, cb), B in trial.terms.items():
            M[ra:rb, ca:cb] += scale * np.einsum("aqc,q,bqc->ab", A, w, B)


def _project_onto(Psi, w):
    """Function applying the L2 projection onto span(Psi) to value arrays."""
    G = np.einsum("aqc,q,bqc->ab", Psi, w, Psi)
    Ginv = np.linalg.inv(G)

    def P(vals):
        coeffs = np.einsum("aqc,q,...qc->...a", Psi, w, vals) @ Ginv.T
        return np.einsum("...a,aqc->...qc", coeffs, Psi)
    return P


def _inclusion_residual(vals, Psi, w) -> float:
    """Max relative L2 distance of the functions in ``vals`` from span(Psi)."""
    if vals.shape[0] == 0:
        return 0.0
    P = _project_onto(Psi, w)
    diff = vals - P(vals)
    num = np.einsum("aqc,q,aqc->a", diff, w, diff)
    den = np.einsum("aqc,q,aqc->a", vals, w, vals)
    scale = max(float(np.max(den)), 1e-300)
    return float(np.sqrt(np.max(num) / scale))


# ----------------------------------------------------------------------
# solution container

@dataclass
class HybridSolution:
    system: "HybridSystem"
    x: np.ndarray
    zhat: TracePair
    metadata: dict

    @property
    def z(self) -> np.ndarray:
        return self.x[: self.system.space.dim]

    def forms(self) -> dict:
        return self.system.space.forms(self.z)

    def traces(self) -> TracePair:
        """Traces of z_h in the coupling degrees (the ones the bracket sees)."""
        return self.system.own_traces(self.x)

    def zhat_tan_vector(self) -> np.ndarray:
        s = self.system
        return self.x[s.off_tan: s.off_tan + s.tan_space.dim]

    def conservativity(self) -> dict:
        """L2 norm of the normal jump of the recovered hybrid normal trace per interior facet."""
        jf = jump(self.zhat.nor, "normal")
        mesh = self.system.mesh
        out = {}
        for f in mesh.interior_facets():
            out[f] = float(np.sqrt(sum(jf.norm([(f, s)]) ** 2 for s in range(2))))
        return out

    def conservativity_norm(self) -> float:
        vals = list(self.conservativity().values())
        return float(np.sqrt(np.sum(np.square(vals)))) if vals else 0.0

    def to_json(self) -> dict:
        s = self.system
        cells = []
        for c in range(s.mesh.num_cells):
            cells.append({"cell": c, "degrees": {str(j): self.z[s.space.block(c, j)].tolist()
                                                 for j in s.space.degrees}})
        meta = {k: v for k, v in self.metadata.items() if k != "history"}
        meta["history"] = [float(h) for h in self.metadata.get("history", [])]
        return {"variant": s.flux.variant, "problem": s.problem.description, "z": cells,
                "zhat_tan": self.zhat.tan.to_json(), "zhat_nor": self.zhat.nor.to_json(),
                "conservativity": self.conservativity_norm(), "metadata": meta}


# ----------------------------------------------------------------------
# dense linear algebra with rank report

def _lstsq(J, b, rtol=1e-11):
    if J.shape[1] == 0:
        return np.zeros(0), {"rank": 0, "deficiency": 0, "cond": 1.0}
    U, S, Vt = svd(J, full_matrices=False)
    if S.size == 0 or S[0] == 0.0:
        return np.zeros(J.shape[1]), {"rank": 0, "deficiency": J.shape[1], "cond": float("inf")}
    rank = int(np.sum(S > rtol * S[0]))
    y = (U[:, :rank].T @ b) / S[:rank]
    x = Vt[:rank].T @ y
    cond = float(S[0] / S[rank - 1]) if rank else float("inf")
    if not np.all(np.isfinite(x)):
        raise NumericError(f"solver breakdown (condition estimate {cond:.3e})")
    return x, {"rank": rank, "deficiency": int(min(J.shape) - rank), "cond": cond}


def _newton(res, jac, x, free, tol, max_iter, linear):
    """Newton on the free entries of x; a linear problem takes exactly one step.

    The stopping test is relative to max(1, |R(x0)|).  For linear problems a
    nonzero final residual (inconsistent data for a singular system) is
    reported in the metadata instead of raised.
    """
    x = np.array(x, dtype=float)
    history, info = [], {"rank": len(free), "deficiency": 0, "cond": 1.0}
    R = res(x)
    scale = max(1.0, float(np.linalg.norm(R)))
    for it in range(max_iter + 1):
        rn = float(np.linalg.norm(R))
        history.append(rn)
        if rn <= tol * scale or (linear and it == 1):
            break
        if it == max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations "
                                   f"(last residual {rn:.3e})", history)
        dx, info = _lstsq(jac(x), R)
        x[free] -= dx
        R = res(x)
    meta = dict(info)
    meta.update({"iterations": len(history) - 1, "history": history, "residual": history[-1],
                 "converged": bool(history[-1] <= tol * scale)})
    return x, meta


# ----------------------------------------------------------------------
# the assembled system

class HybridSystem:
    """Hybrid discretization of ``problem`` on ``mesh`` (all variants but AFW-H)."""

    def __init__(self, problem: ProblemSpec, mesh: SimplicialMesh, spaces: dict, flux: FluxConfig):
        if problem.n != mesh.n:
            raise ConfigurationError(f"problem is posed for n={problem.n}, mesh has n={mesh.n}")
        self.problem = problem
        self.mesh = mesh
        self.flux = flux
        missing = [j for j in problem.active if j not in spaces]
        if missing:
            raise ConfigurationError(f"no finite element space given for active degrees {missing}")
        self.space = BrokenSpace(mesh, {j: spaces[j] for j in problem.active})
        self.J = coupling_degrees(problem.active, mesh.n)
        n = mesh.n
        self.hat_orders = {}
        for j in self.J:
            default = max(self.space.order(j), self.space.order(j + 1))
            self.hat_orders[j] = flux.orders.get(j, default)
        self.tan_space = TraceSpace(mesh, "tan", self.hat_orders, single_valued=True, include_boundary=True)
        self.nor_space = None
        if flux.variant == "XG":
            xg_nor = flux.check_orders.get("nor", {})
            xg_tan = flux.check_orders.get("tan", {})
            self.hat_orders = {j: xg_tan.get(j, self.hat_orders[j]) for j in self.J}
            self.tan_space = TraceSpace(mesh, "tan", self.hat_orders, single_valued=True, include_boundary=True)
            self.nor_orders = {j: xg_nor.get(j, max(self.space.order(j), self.hat_orders[j])) for j in self.J}
            self.nor_space = TraceSpace(mesh, "nor", self.nor_orders, single_valued=True, include_boundary=True)
        self.off_tan = self.space.dim
        self.off_nor = self.off_tan + self.tan_space.dim
        self.ndof = self.off_nor + (self.nor_space.dim if self.nor_space else 0)
        rmax = max([self.space.order(j) for j in self.space.degrees] + list(self.hat_orders.values())
                   + (list(self.nor_orders.values()) if self.nor_space else []))
        self.rmax = rmax
        self.qf = 2 * rmax + 2
        if flux.quad_degree is not None:
            self.qc = int(flux.quad_degree)
        else:
            self.qc = 2 * rmax + (2 if problem.linear else 4)
        self.diagnostics = {}
        self._check_hypotheses()
        self._assemble()
        pinned = []
        for f in mesh.boundary_facets():
            for j in self.J:
                sl = self._tan_block(f, j)
                pinned.extend(range(sl.start, sl.stop))
        self.pinned = np.array(pinned, dtype=int)
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.pinned] = False
        self.free = np.nonzero(mask)[0]
        self._frozen = None

    # -- layout -------------------------------------------------------
    def _z_block(self, c, j) -> slice:
        return self.space.block(c, j)

    def _tan_block(self, f, j) -> slice:
        sl = self.tan_space.block(f, j)
        return slice(sl.start + self.off_tan, sl.stop + self.off_tan)

    def _nor_block(self, f, j) -> slice:
        sl = self.nor_space.block(f, j)
        return slice(sl.start + self.off_nor, sl.stop + self.off_nor)

    @property
    def boundary_dim(self) -> int:
        return len(self.pinned)

    @property
    def boundary_space(self) -> TraceSpace:
        return TraceSpace(self.mesh, "tan", self.hat_orders, single_valued=True, include_boundary=True)

    # -- hypotheses ---------------------------------------------------
    def _check_hypotheses(self):
        mesh, sp, n = self.mesh, self.space, self.mesh.n
        v = self.flux.variant
        if v == "IP_H":
            k = self.problem.k
            # the IP-H fluxes eliminate rho through rho = du, which holds only for Hodge-Laplace
            if self.problem.kind != "hodge_laplace_semilinear" or k is None:
                raise ConfigurationError("IP_H is defined for the Hodge-Laplace problem only")
            for c in range(mesh.num_cells):
                S = mesh.simplices[c]
                x, w = S.quadrature(2 * self.rmax + 2)
                B = sp.basis(c, k)
                if k >= 1:
                    res = _inclusion_residual(codiff(B)(x), sp.basis(c, k - 1)(x), w)
                    if res > 1e-10:
                        raise ConfigurationError(f"IP_H needs delta W^{k} in W^{k - 1} (residual {res:.2e})")
                if k < n and k + 1 in sp.degrees:
                    res = _inclusion_residual(ext_d(B)(x), sp.basis(c, k + 1)(x), w)
                    if res > 1e-10:
                        raise ConfigurationError(f"IP_H needs d W^{k} in W^{k + 1} (residual {res:.2e})")
        if v == "XG":
            for f in mesh.interior_facets():
                for j in self.J:
                    a0, a1 = self.flux.alpha_of(j, f, 0), self.flux.alpha_of(j, f, 1)
                    if a0 != a1:
                        raise ConfigurationError("XG penalties must be single-valued on each facet")
                    if abs(a0 * self.flux.beta_of(j, f, 0) - 1.0) > 1e-12:
                        warnings.warn(f"XG with alpha*beta != 1 on facet {f}, degree {j}: "
                                      "equivalence with LDG-H does not apply", RuntimeWarning)
                        self.diagnostics["alpha_beta_mismatch"] = True
            self._check_xg_inclusions()
        # strong conservativity expectation from trace-space inclusions
        strong = True
        if v in ("LDG_H", "IP_H", "XG"):
            for f in mesh.interior_facets():
                for s in range(2):
                    c = mesh.sides[(f, s)].cell
                    _, _, w = mesh.geometry[f].quadrature(self.qf)
                    for j in self.J:
                        Psi = facet_basis_values(mesh, f, j, self.hat_orders[j], self.qf)
                        if v == "IP_H" and j == self.problem.k:
                            nor = trace_values(ext_d(sp.basis(c, j)), mesh, f, s, "nor", self.qf)
                        else:
                            nor = trace_values(sp.basis(c, j + 1), mesh, f, s, "nor", self.qf)
                        vals = [nor]
                        if self.flux.penalty_form == "piecewise_constant":
                            if v == "IP_H" and j == self.problem.k - 1:
                                vals.append(trace_values(codiff(sp.basis(c, j + 1)), mesh, f, s, "tan", self.qf))
                            else:
                                vals.append(trace_values(sp.basis(c, j), mesh, f, s, "tan", self.qf))
                        for arr in vals:
                            if _inclusion_residual(arr, Psi, w) > 1e-10:
                                strong = False
                    if self.flux.penalty_form == "piecewise_constant" and v != "XG":
                        for j in self.J:
                            if self.flux.alpha_of(j, f, 0) != self.flux.alpha_of(j, f, 1):
                                strong = False
        self.strong_conservativity_expected = strong if v != "AFW_H" else None

    def _check_xg_inclusions(self):
        mesh, sp = self.mesh, self.space
        for f in range(mesh.num_facets):
            _, _, w = mesh.geometry[f].quadrature(self.qf)
            for j in self.J:
                Pn = facet_basis_values(mesh, f, j, self.nor_orders[j], self.qf)
                Pt = facet_basis_values(mesh, f, j, self.hat_orders[j], self.qf)
                for s in range(len(mesh.facets[f].sides)):
                    c = mesh.sides[(f, s)].cell
                    tan = trace_values(sp.basis(c, j), mesh, f, s, "tan", self.qf)
                    if _inclusion_residual(tan, Pn, w) > 1e-10:
                        raise ConfigurationError(
                            f"XG inclusion failed: tangential traces of W^{j} are not in the check normal space "
                            f"on facet {f}")
                    if not mesh.facets[f].boundary:
                        nor = trace_values(sp.basis(c, j + 1), mesh, f, s, "nor", self.qf)
                        for name, arr in (("normal traces of W^%d" % (j + 1), nor), ("tangential traces of W^%d" % j, tan)):
                            if _inclusion_residual(arr, Pt, w) > 1e-10:
                                raise ConfigurationError(
                                    f"XG inclusion failed: {name} are not in the check tangential space on facet {f}")
                if mesh.facets[f].boundary and _inclusion_residual(Pt, Pn, w) > 1e-10:
                    raise ConfigurationError(
                        f"XG inclusion failed: check tangential space not contained in check normal space on "
                        f"boundary facet {f}")

    # -- assembly -----------------------------------------------------
    def _assemble(self):
        mesh, sp, n = self.mesh, self.space, self.mesh.n
        self.A = np.zeros((self.ndof, self.ndof))
        self._cell_cache = []
        symmetric_volume = self.flux.variant == "LDG_H"
        for c in range(mesh.num_cells):
            S = mesh.simplices[c]
            x, w = S.quadrature(self.qc)
            V, dV, dlV = {}, {}, {}
            for j in sp.degrees:
                B = sp.basis(c, j)
                V[j] = B(x)
                if j < n:
                    dV[j] = ext_d(B)(x)
                if j > 0:
                    dlV[j] = codiff(B)(x)
            self._cell_cache.append((x, w, V))
            for m in self.J:
                rm, rp = self._z_block(c, m), self._z_block(c, m + 1)
                if symmetric_volume:
                    # (z^m, delta w^{m+1}) + (delta z^{m+1}, w^m)
                    self.A[rp, rm] += np.einsum("aqc,q,bqc->ab", dlV[m + 1], w, V[m])
                    self.A[rm, rp] += np.einsum("aqc,q,bqc->ab", V[m], w, dlV[m + 1])
                else:
                    # (z^{m+1}, d w^m) + (z^m, delta w^{m+1})
                    self.A[rm, rp] += np.einsum("aqc,q,bqc->ab", dV[m], w, V[m + 1])
                    self.A[rp, rm] += np.einsum("aqc,q,bqc->ab", dlV[m + 1], w, V[m])
        self.side_maps = {}
        for (f, s) in mesh.all_sides():
            self.side_maps[(f, s)] = self._side_maps(f, s)
        for (f, s), maps in self.side_maps.items():
            self._facet_terms(f, s, maps)

    def _raw_traces(self, f, s):
        mesh, sp = self.mesh, self.space
        c = mesh.sides[(f, s)].cell
        ztan, znor = {}, {}
        for j in self.J:
            ztan[j] = Lin.block(self._z_block(c, j), trace_values(sp.basis(c, j), mesh, f, s, "tan", self.qf))
            znor[j] = Lin.block(self._z_block(c, j + 1), trace_values(sp.basis(c, j + 1), mesh, f, s, "nor", self.qf))
        return c, ztan, znor

    def _side_maps(self, f, s):
        mesh, sp, flux = self.mesh, self.space, self.flux
        geom = mesh.geometry[f]
        _, _, w = geom.quadrature(self.qf)
        c, ztan, znor = self._raw_traces(f, s)
        other = mesh.other_side(f, s)
        maps = {"cell": c, "w": w, "ztan": ztan, "znor": znor, "hat_tan": {}, "hat_nor": {}, "psi": {}}
        if other is not None:
            _, otan, onor = self._raw_traces(*other)
        for j in self.J:
            Psi = facet_basis_values(mesh, f, j, self.hat_orders[j], self.qf)
            maps["psi"][j] = Psi
            alpha = flux.alpha_of(j, f, s)
            hat = Lin.block(self._tan_block(f, j), Psi)
            P = _project_onto(Psi, w)
            if flux.variant == "XG":
                hat_t = hat if other is None else 0.5 * (ztan[j] + otan[j]) + hat
                sign = 1.0 if s == 0 else -1.0
                Pn = facet_basis_values(mesh, f, j, self.nor_orders[j], self.qf)
                chk = Lin.block(self._nor_block(f, j), sign * Pn)
                maps.setdefault("check_nor", {})[j] = chk
                maps.setdefault("check_nor_psi", {})[j] = Pn
                maps.setdefault("check_tan", {})[j] = hat
                avg_nor = znor[j] if other is None else 0.5 * (znor[j] - onor[j])
                maps["hat_tan"][j] = hat_t
                maps["hat_nor"][j] = avg_nor + chk
                maps.setdefault("tan_jump", {})[j] = ztan[j] if other is None else 0.5 * (ztan[j] - otan[j])
                maps.setdefault("nor_jump", {})[j] = None if other is None else 0.5 * (znor[j] + onor[j])
                continue
            maps["hat_tan"][j] = hat
            if flux.variant == "IP_H":
                k = self.problem.k
                B = sp.basis(c, k)
                ub = self._z_block(c, k)
                if j == k - 1:
                    A_ = Lin.block(ub, trace_values(B, mesh, f, s, "nor", self.qf))
                    B_ = Lin.block(ub, trace_values(codiff(B), mesh, f, s, "tan", self.qf))
                else:
                    A_ = Lin.block(ub, trace_values(ext_d(B), mesh, f, s, "nor", self.qf))
                    B_ = Lin.block(ub, trace_values(B, mesh, f, s, "tan", self.qf))
                pen = alpha * (hat - B_)
                if flux.penalty_form == "reduced_stabilization":
                    pen = pen.map(P)
                maps["hat_nor"][j] = A_ - pen
            else:
                pen = alpha * (hat - ztan[j])
                if flux.penalty_form == "reduced_stabilization" or flux.variant == "NC_H_REDUCED":
                    pen = pen.map(P)
                hn = znor[j] - pen
                if flux.variant == "NC_H_REDUCED":
                    hn = hn.map(P)
                maps["hat_nor"][j] = hn
                maps.setdefault("pen", {})[j] = pen
        return maps

    def _facet_terms(self, f, s, maps):
        A, w, v = self.A, maps["w"], self.flux.variant
        for j in self.J:
            ztan, znor = maps["ztan"][j], maps["znor"][j]
            hat_test = Lin.block(self._tan_block(f, j), maps["psi"][j])
            if v == "LDG_H":
                pen = maps["pen"][j]
                _pair_into(A, znor, maps["hat_tan"][j], w)          # <zhat^tan, w^nor>
                _pair_into(A, ztan, pen, w)                         # <alpha(zhat - z^tan), w^tan>
                _pair_into(A, hat_test, maps["hat_nor"][j], w)      # <zhat^nor, what>
                continue
            _pair_into(A, znor, maps["hat_tan"][j], w)
            _pair_into(A, ztan, maps["hat_nor"][j], w, -1.0)
            if v == "XG":
                other = self.mesh.other_side(f, s)
                chk_test = maps["check_nor"][j]
                alpha = self.flux.alpha_of(j, f, s)
                _pair_into(A, chk_test, maps["check_nor"][j] - alpha * maps["tan_jump"][j], w)
                if other is None:
                    _pair_into(A, chk_test, alpha * maps["check_tan"][j], w)
                else:
                    beta = self.flux.beta_of(j, f, s)
                    _pair_into(A, hat_test, maps["check_tan"][j] - beta * maps["nor_jump"][j], w)
            else:
                _pair_into(A, hat_test, maps["hat_nor"][j], w)

    # -- nonlinear terms ---------------------------------------------
    def _zflat(self, x, c):
        n = self.mesh.n
        sl = degree_slices(n)
        xq, w, V = self._cell_cache[c]
        Z = np.zeros((len(w), 2 ** n))
        for j in self.space.degrees:
            Z[:, sl[j]] = np.einsum("b,bqc->qc", x[self._z_block(c, j)], V[j])
        return xq, w, V, Z

    def source_vector(self, x) -> np.ndarray:
        """(f(z), w) for every test function of W_h (zeros in trace rows)."""
        out = np.zeros(self.ndof)
        sl = degree_slices(self.mesh.n)
        for c in range(self.mesh.num_cells):
            xq, w, V, Z = self._zflat(x, c)
            F = self.problem.f(xq, Z)
            for j in self.space.degrees:
                out[self._z_block(c, j)] += np.einsum("aqc,q,qc->a", V[j], w, F[:, sl[j]])
        return out

    def source_jacobian(self, x) -> np.ndarray:
        M = np.zeros((self.ndof, self.ndof))
        sl = degree_slices(self.mesh.n)
        for c in range(self.mesh.num_cells):
            xq, w, V, Z = self._zflat(x, c)
            Jf = self.problem.fprime(xq, Z)
            for i in self.space.degrees:
                for j in self.space.degrees:
                    blk = Jf[:, sl[i], sl[j]]
                    if np.any(blk):
                        M[self._z_block(c, i), self._z_block(c, j)] += np.einsum(
                            "aqc,q,qcd,bqd->ab", V[i], w, blk, V[j])
        return M

    def residual(self, x) -> np.ndarray:
        if self._frozen is not None:
            return self._frozen @ x - self._frozen_rhs
        return self.A @ x - self.source_vector(x)

    def jacobian(self, x) -> np.ndarray:
        if self._frozen is not None:
            return self._frozen
        return self.A - self.source_jacobian(x)

    def matrix(self) -> np.ndarray:
        """Linearized operator at z = 0 restricted to the free unknowns."""
        J = self.jacobian(np.zeros(self.ndof))
        return J[np.ix_(self.free, self.free)]

    # -- boundary data -------------------------------------------------
    def boundary_vector(self, data) -> np.ndarray:
        """Boundary coordinates from a FacetField, a callable or a raw vector."""
        if data is None:
            return np.zeros(self.boundary_dim)
        if isinstance(data, FacetField):
            full = self.tan_space.interpolate(data)
            return full[self.pinned - self.off_tan]
        if callable(data):
            return self.boundary_vector(boundary_field_from_function(self.mesh, self.J, self.hat_orders, data))
        g = np.asarray(data, dtype=float)
        if g.shape != (self.boundary_dim,):
            raise ConfigurationError(f"boundary data has length {g.size}, expected {self.boundary_dim}")
        return g

    # -- solving -------------------------------------------------------
    def newton_solve(self, boundary_data=None, tol=1e-10, max_iter=20, x0=None) -> HybridSolution:
        g = self.boundary_vector(boundary_data)
        x = np.zeros(self.ndof) if x0 is None else np.array(x0, dtype=float)
        x[self.pinned] = g
        free = self.free
        x, meta = _newton(lambda v: self.residual(v)[free],
                          lambda v: self.jacobian(v)[np.ix_(free, free)],
                          x, free, tol, max_iter, self._is_linear())
        meta.update({"ndof": int(self.ndof), "nfree": int(len(free))})
        return HybridSolution(self, x, self.recover(x), meta)

    def _is_linear(self):
        return self._frozen is not None or self.problem.linear

    def solve(self, boundary_data=None, tol=1e-10, max_iter=20) -> HybridSolution:
        return self.newton_solve(boundary_data, tol=tol, max_iter=max_iter)

    def random_boundary(self, rng, x_base=None) -> np.ndarray:
        return self.compatible_boundary(rng.normal(size=self.boundary_dim), x_base)

    def boundary_field(self, g) -> FacetField:
        full = np.zeros(self.tan_space.dim)
        full[self.pinned - self.off_tan] = g
        return self.tan_space.expand(full).restrict([(f, 0) for f in self.mesh.boundary_facets()])

    def compatible_boundary(self, g, x_base=None) -> np.ndarray:
        """Project boundary data onto the subspace for which the linearized
        homogeneous problem is consistent (matters only for singular systems)."""
        x = np.zeros(self.ndof) if x_base is None else x_base
        Jfull = self.jacobian(x)
        Jff = Jfull[np.ix_(self.free, self.free)]
        Jfb = Jfull[np.ix_(self.free, self.pinned)]
        U, S, _ = svd(Jff)
        rank = int(np.sum(S > 1e-11 * S[0])) if S.size else 0
        L = U[:, rank:]
        if L.shape[1] == 0:
            return g
        C = L.T @ Jfb
        Nc = null_space(C, rcond=1e-11)
        return Nc @ (Nc.T @ g)

    # -- traces --------------------------------------------------------
    def _fit(self, f, s, j, vals):
        geom = self.mesh.geometry[f]
        return FacetPolyForm(geom, j, self.rmax, facet_fit(geom, j, self.rmax, vals, self.qf), f, s)

    def recover(self, x) -> TracePair:
        tan, nor = FacetField(self.mesh), FacetField(self.mesh)
        m = self.mesh.n - 1
        for (f, s), maps in self.side_maps.items():
            q = len(maps["w"])
            for j in self.J:
                C = ext.dim(m, j)
                tan.set(f, s, self._fit(f, s, j, maps["hat_tan"][j].eval(x, q, C)))
                nor.set(f, s, self._fit(f, s, j, maps["hat_nor"][j].eval(x, q, C)))
        return TracePair(tan, nor)

    def own_traces(self, x) -> TracePair:
        tan, nor = FacetField(self.mesh), FacetField(self.mesh)
        m = self.mesh.n - 1
        for (f, s), maps in self.side_maps.items():
            q = len(maps["w"])
            for j in self.J:
                C = ext.dim(m, j)
                tan.set(f, s, self._fit(f, s, j, maps["ztan"][j].eval(x, q, C)))
                nor.set(f, s, self._fit(f, s, j, maps["znor"][j].eval(x, q, C)))
        return TracePair(tan, nor)

    def is_symmetric(self, x=None, tol=1e-12) -> float:
        """Relative asymmetry of the linearized operator on the free unknowns."""
        J = self.jacobian(np.zeros(self.ndof) if x is None else x)[np.ix_(self.free, self.free)]
        return float(np.max(np.abs(J - J.T)) / max(np.max(np.abs(J)), 1e-300))


def boundary_field_from_function(mesh, degrees, orders, func) -> FacetField:
    """Tangential boundary data from func(x) -> (q, 2^n): L2 projection of the trace."""
    from .polyforms import tangential_map
    out = FacetField(mesh)
    sl = degree_slices(mesh.n)
    for f in mesh.boundary_facets():
        geom = mesh.geometry[f]
        for j in degrees:
            r = orders[j]
            deg = 2 * r + 4
            x, s, w = geom.quadrature(deg)
            vals = np.asarray(func(x))[:, sl[j]] @ tangential_map(mesh, f, j)
            out.set(f, 0, FacetPolyForm(geom, j, r, facet_fit(geom, j, r, vals, deg), f, 0))
    return out


# ----------------------------------------------------------------------
# AFW-H: conforming solve plus Riesz recovery

class AFWSystem:
    """AFW-H through its conforming equivalent.

    z_h lives in V_h (tangentially continuous in the coupling degrees) and
    satisfies (dz, w) + (z, dw) = (f(z), w) for w in the subspace with zero
    boundary traces.  The hybrid normal trace is the Riesz representer of
    the residual functional on the tangential traces of each cell.
    """

    def __init__(self, problem: ProblemSpec, mesh: SimplicialMesh, spaces: dict, flux: FluxConfig):
        if problem.n != mesh.n:
            raise ConfigurationError(f"problem is posed for n={problem.n}, mesh has n={mesh.n}")
        self.problem, self.mesh, self.flux = problem, mesh, flux
        missing = [j for j in problem.active if j not in spaces]
        if missing:
            raise ConfigurationError(f"no finite element space given for active degrees {missing}")
        self.space = BrokenSpace(mesh, {j: spaces[j] for j in problem.active})
        self.J = coupling_degrees(problem.active, mesh.n)
        self.hat_orders = {j: self.space.order(j) for j in self.J}
        self.rmax = max(self.space.order(j) for j in self.space.degrees)
        self.qf = 2 * self.rmax + 2
        self.qc = flux.quad_degree if flux.quad_degree is not None else 2 * self.rmax + (2 if problem.linear else 4)
        self.ndof = self.space.dim
        self.off_tan = self.space.dim
        # strong conservativity holds for n = 1 and for the k = n Hodge-Laplace case
        hl = problem.kind in ("hodge_laplace_semilinear", "vvp_stokes", "maxwell_type")
        if mesh.n == 1 or (hl and problem.k == mesh.n):
            self.strong_conservativity_expected = True
        elif hl and problem.k == 0:
            self.strong_conservativity_expected = False
        else:
            self.strong_conservativity_expected = None
        self.diagnostics = {}
        self._frozen = None
        self._assemble()

    def _assemble(self):
        mesh, sp, n = self.mesh, self.space, self.mesh.n
        self.A = np.zeros((self.ndof, self.ndof))
        self._cell_cache = []
        for c in range(mesh.num_cells):
            x, w = mesh.simplices[c].quadrature(self.qc)
            V = {j: sp.basis(c, j)(x) for j in sp.degrees}
            dV = {j: ext_d(sp.basis(c, j))(x) for j in sp.degrees if j < n}
            self._cell_cache.append((x, w, V))
            for m in self.J:
                rm, rp = sp.block(c, m), sp.block(c, m + 1)
                self.A[rm, rp] += np.einsum("aqc,q,bqc->ab", dV[m], w, V[m + 1])   # (z^{m+1}, d w^m)
                self.A[rp, rm] += np.einsum("aqc,q,bqc->ab", V[m + 1], w, dV[m])   # (d z^m, w^{m+1})
        # tangential traces of the basis on every side
        self.T = {}
        for (f, s) in mesh.all_sides():
            c = mesh.sides[(f, s)].cell
            for j in self.J:
                self.T[(f, s, j)] = trace_values(sp.basis(c, j), mesh, f, s, "tan", self.qf)
        rows_int, rows_bd = [], []
        self.bspace = TraceSpace(mesh, "tan", self.hat_orders, single_valued=True, include_boundary=True)
        bfacets = mesh.boundary_facets()
        self._bmoments = []
        for f in range(mesh.num_facets):
            _, _, w = mesh.geometry[f].quadrature(self.qf)
            for j in self.J:
                Phi = facet_basis_values(mesh, f, j, self.hat_orders[j], self.qf)
                if mesh.facets[f].boundary:
                    c = mesh.sides[(f, 0)].cell
                    row = np.zeros((len(Phi), self.ndof))
                    row[:, sp.block(c, j)] = np.einsum("aqc,q,bqc->ab", Phi, w, self.T[(f, 0, j)])
                    rows_bd.append(row)
                    self._bmoments.append((f, j, np.einsum("aqc,q,bqc->ab", Phi, w, Phi)))
                else:
                    row = np.zeros((len(Phi), self.ndof))
                    for s, sign in ((0, 1.0), (1, -1.0)):
                        c = mesh.sides[(f, s)].cell
                        row[:, sp.block(c, j)] += sign * np.einsum("aqc,q,bqc->ab", Phi, w, self.T[(f, s, j)])
                    rows_int.append(row)
        self.C_int = np.vstack(rows_int) if rows_int else np.zeros((0, self.ndof))
        self.C_bd = np.vstack(rows_bd) if rows_bd else np.zeros((0, self.ndof))
        self.N = null_space(self.C_int, rcond=1e-11) if len(self.C_int) else np.eye(self.ndof)
        CbN = self.C_bd @ self.N
        K = null_space(CbN, rcond=1e-11) if len(CbN) else np.eye(self.N.shape[1])
        self.N0 = self.N @ K
        self.boundary_dim = sum(self.bspace.block_dim(j) for f in bfacets for j in self.J)
        self._bfacets = bfacets

    # reuse the nonlinear helpers of HybridSystem
    _zflat = HybridSystem._zflat
    _z_block = HybridSystem._z_block

    def source_vector(self, z):
        return HybridSystem.source_vector(self, z)

    def source_jacobian(self, z):
        return HybridSystem.source_jacobian(self, z)

    def residual(self, z):
        if self._frozen is not None:
            return self._frozen @ z - self._frozen_rhs
        return self.A @ z - self.source_vector(z)

    def jacobian(self, z):
        if self._frozen is not None:
            return self._frozen
        return self.A - self.source_jacobian(z)

    def boundary_vector(self, data) -> np.ndarray:
        if data is None:
            return np.zeros(self.boundary_dim)
        if isinstance(data, FacetField):
            full = self.bspace.interpolate(data)
            return np.concatenate([full[self.bspace.block(f, j)] for f in self._bfacets for j in self.J]) \
                if self._bfacets else np.zeros(0)
        if callable(data):
            return self.boundary_vector(boundary_field_from_function(self.mesh, self.J, self.hat_orders, data))
        g = np.asarray(data, dtype=float)
        if g.shape != (self.boundary_dim,):
            raise ConfigurationError(f"boundary data has length {g.size}, expected {self.boundary_dim}")
        return g

    def _boundary_moments(self, g):
        out, pos = [], 0
        for f, j, G in self._bmoments:
            size = G.shape[0]
            out.append(G @ g[pos:pos + size])
            pos += size
        return np.concatenate(out) if out else np.zeros(0)

    def lift(self, g) -> tuple:
        """An element of V_h with the given boundary traces (least squares) and its misfit."""
        CbN = self.C_bd @ self.N
        rhs = self._boundary_moments(g)
        if CbN.shape[0] == 0:
            return np.zeros(self.ndof), 0.0
        a, *_ = np.linalg.lstsq(CbN, rhs, rcond=None)
        misfit = float(np.linalg.norm(CbN @ a - rhs))
        return self.N @ a, misfit

    def random_boundary(self, rng, x_base=None) -> np.ndarray:
        """Boundary traces of a random member of V_h for which the homogeneous
        linearized conforming problem is consistent."""
        a = rng.normal(size=self.N.shape[1])
        z = np.zeros(self.ndof) if x_base is None else x_base
        Jz = self.jacobian(z)
        K = self.N0.T @ Jz @ self.N0
        if K.size:
            U, S, _ = svd(K)
            rank = int(np.sum(S > 1e-11 * S[0])) if S.size and S[0] > 0 else 0
            L = U[:, rank:]
            if L.shape[1]:
                Nc = null_space(L.T @ self.N0.T @ Jz @ self.N, rcond=1e-11)
                a = Nc @ (Nc.T @ a)
        return self.trace_coordinates(self.N @ a)

    def boundary_field(self, g) -> FacetField:
        full = np.zeros(self.bspace.dim)
        pos = 0
        for f in self._bfacets:
            for j in self.J:
                sl = self.bspace.block(f, j)
                full[sl] = g[pos:pos + sl.stop - sl.start]
                pos += sl.stop - sl.start
        return self.bspace.expand(full).restrict([(f, 0) for f in self._bfacets])

    def trace_coordinates(self, z) -> np.ndarray:
        out = []
        for f in self._bfacets:
            geom = self.mesh.geometry[f]
            for j in self.J:
                vals = np.einsum("b,bqc->qc", z[self.space.block(self.mesh.sides[(f, 0)].cell, j)], self.T[(f, 0, j)])
                out.append(facet_fit(geom, j, self.hat_orders[j], vals, self.qf).ravel())
        return np.concatenate(out) if out else np.zeros(0)

    def newton_solve(self, boundary_data=None, tol=1e-10, max_iter=20, x0=None) -> HybridSolution:
        g = self.boundary_vector(boundary_data)
        zb, misfit = self.lift(g)
        N0 = self.N0
        z0 = zb.copy() if x0 is None else np.array(x0, dtype=float)
        c, meta = _newton(lambda c: N0.T @ self.residual(z0 + N0 @ c),
                          lambda c: N0.T @ self.jacobian(z0 + N0 @ c) @ N0,
                          np.zeros(N0.shape[1]), np.arange(N0.shape[1]), tol, max_iter,
                          self._frozen is not None or self.problem.linear)
        z = z0 + N0 @ c
        meta.update({"boundary_misfit": misfit, "ndof": int(self.ndof), "nfree": int(N0.shape[1])})
        return HybridSolution(self, z, self.recover(z), meta)

    solve = HybridSystem.solve

    def recover(self, z) -> TracePair:
        mesh, sp = self.mesh, self.space
        R = self.residual(z)  # (dz, w) + (z, dw) - (f, w) for every basis w
        tan, nor = FacetField(mesh), FacetField(mesh)
        m = mesh.n - 1
        for c in range(mesh.num_cells):
            sides = mesh.cell_sides(c)
            for j in self.J:
                G = sum(np.einsum("aqc,q,bqc->ab", self.T[(f, s, j)], mesh.geometry[f].quadrature(self.qf)[2],
                                  self.T[(f, s, j)]) for f, s in sides)
                coef, *_ = np.linalg.lstsq(G, R[sp.block(c, j)], rcond=1e-12)
                for f, s in sides:
                    geom = mesh.geometry[f]
                    zt = np.einsum("b,bqc->qc", z[sp.block(c, j)], self.T[(f, s, j)])
                    zn = np.einsum("b,bqc->qc", coef, self.T[(f, s, j)])
                    r = self.hat_orders[j]
                    tan.set(f, s, FacetPolyForm(geom, j, r, facet_fit(geom, j, r, zt, self.qf), f, s))
                    nor.set(f, s, FacetPolyForm(geom, j, r, facet_fit(geom, j, r, zn, self.qf), f, s))
        return TracePair(tan, nor)

    def own_traces(self, z) -> TracePair:
        mesh = self.mesh
        tan, nor = FacetField(mesh), FacetField(mesh)
        for (f, s) in mesh.all_sides():
            c = mesh.sides[(f, s)].cell
            geom = mesh.geometry[f]
            for j in self.J:
                r = self.rmax
                zt = trace_values(self.space.form(z, c, j), mesh, f, s, "tan", self.qf)
                zn = trace_values(self.space.form(z, c, j + 1), mesh, f, s, "nor", self.qf)
                tan.set(f, s, FacetPolyForm(geom, j, r, facet_fit(geom, j, r, zt, self.qf), f, s))
                nor.set(f, s, FacetPolyForm(geom, j, r, facet_fit(geom, j, r, zn, self.qf), f, s))
        return TracePair(tan, nor)

    def compatible_boundary(self, g, x_base=None):
        return g

    def matrix(self):
        return self.N0.T @ self.jacobian(np.zeros(self.ndof)) @ self.N0

    def is_symmetric(self, x=None, tol=1e-12):
        J = self.jacobian(np.zeros(self.ndof) if x is None else x)
        return float(np.max(np.abs(J - J.T)) / max(np.max(np.abs(J)), 1e-300))


# ----------------------------------------------------------------------
# public entry points

def assemble(problem: ProblemSpec, mesh: SimplicialMesh, spaces: dict, flux: FluxConfig | None = None):
    """Build the hybrid system for ``problem`` with spaces {degree: (family, r) | FormSpaceSpec}."""
    flux = FluxConfig() if flux is None else flux
    if flux.variant == "AFW_H":
        return AFWSystem(problem, mesh, spaces, flux)
    return HybridSystem(problem, mesh, spaces, flux)


def solve(system, boundary_data=None, tol=1e-10) -> HybridSolution:
    return system.solve(boundary_data, tol=tol)


def newton_solve(system, boundary_data=None, tol=1e-10, max_iter=20) -> HybridSolution:
    return system.newton_solve(boundary_data, tol=tol, max_iter=max_iter)


def linearized(system, solution: HybridSolution | None = None):
    """The variational system at ``solution``: same layout, Jacobian frozen, zero source."""
    import copy
    x = np.zeros(system.ndof) if solution is None else solution.x
    lin = copy.copy(system)
    lin._frozen = system.jacobian(x).copy()
    lin._frozen_rhs = np.zeros(system.ndof)
    lin.base_solution = solution
    return lin
