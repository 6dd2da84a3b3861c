"""Catalog of canonical systems Dz = f(x, z).

Pointwise values are handled in the flat layout of Alt R^n: the 2^n
coefficients of degrees 0..n concatenated.  ``f(x, z)`` maps arrays of
shape (q, n) and (q, 2^n) to (q, 2^n) and ``fprime`` returns (q, 2^n, 2^n).
Only the active degrees of a problem carry unknowns; the callbacks are
still written on the full layout so that every problem looks the same to
the assembler.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import exterior as ext


def degree_slices(n: int) -> list:
    cuts = np.cumsum([0] + [ext.dim(n, k) for k in range(n + 1)])
    return [slice(int(cuts[k]), int(cuts[k + 1])) for k in range(n + 1)]


def _as_source(n, k, source):
    """Normalize a source into a callable x -> (q, C(n,k))."""
    if source is None:
        return lambda x: np.zeros((len(x), ext.dim(n, k)))
    if callable(source):
        return source
    if isinstance(source, dict):
        terms = source.get("monomials")
        if terms is None:
            const = np.asarray(source.get("constant", np.zeros(ext.dim(n, k))), dtype=float)
            return lambda x: np.broadcast_to(const, (len(x), ext.dim(n, k))).copy()
        exps = [np.asarray(t["exp"], dtype=int) for t in terms]
        coeffs = [np.asarray(t["coeffs"], dtype=float) for t in terms]

        def poly(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros((len(x), ext.dim(n, k)))
            for e, c in zip(exps, coeffs):
                out += np.prod(x ** e, axis=1)[:, None] * c
            return out
        return poly
    const = np.asarray(source, dtype=float).reshape(ext.dim(n, k))
    return lambda x: np.broadcast_to(const, (len(x), ext.dim(n, k))).copy()


@dataclass
class FSpec:
    """Potential F(x, u) for the u-block of Hodge-Laplace type problems."""
    F: Callable
    dF: Callable
    d2F: Callable
    description: str = ""
    linear: bool = True


def F_linear(n, k, source=None) -> FSpec:
    g = _as_source(n, k, source)
    C = ext.dim(n, k)
    return FSpec(lambda x, u: np.sum(g(x) * u, axis=-1),
                 lambda x, u: g(x),
                 lambda x, u: np.zeros(u.shape + (C,)),
                 "linear", True)


def F_quadratic(n, k, c=1.0, source=None) -> FSpec:
    """F = c/2 |u|^2 + (f, u)."""
    g = _as_source(n, k, source)
    C = ext.dim(n, k)
    return FSpec(lambda x, u: 0.5 * c * np.sum(u * u, axis=-1) + np.sum(g(x) * u, axis=-1),
                 lambda x, u: c * u + g(x),
                 lambda x, u: c * np.broadcast_to(np.eye(C), u.shape + (C,)).copy(),
                 f"quadratic c={c}", True)


def F_quartic(n, k, c=1.0, source=None) -> FSpec:
    """F = c/4 |u|^4 + (f, u); F''(u) v = c (|u|^2 v + 2 (u, v) u)."""
    g = _as_source(n, k, source)
    C = ext.dim(n, k)

    def d2(x, u):
        uu = np.sum(u * u, axis=-1)[..., None, None]
        return c * (uu * np.eye(C) + 2.0 * u[..., :, None] * u[..., None, :])
    return FSpec(lambda x, u: 0.25 * c * np.sum(u * u, axis=-1) ** 2 + np.sum(g(x) * u, axis=-1),
                 lambda x, u: c * np.sum(u * u, axis=-1)[..., None] * u + g(x),
                 d2, f"quartic c={c}", False)


def make_F(n, k, spec) -> FSpec:
    """Build an FSpec from a JSON-style dict {"type": ..., "c": ..., "source": ...}."""
    if spec is None:
        return F_linear(n, k, None)
    if isinstance(spec, FSpec):
        return spec
    kind = spec.get("type", "linear")
    src = spec.get("source")
    if kind in ("linear", "zero"):
        return F_linear(n, k, src)
    if kind == "quadratic":
        return F_quadratic(n, k, float(spec.get("c", 1.0)), src)
    if kind == "quartic":
        return F_quartic(n, k, float(spec.get("c", 1.0)), src)
    raise ValueError(f"unknown potential type {kind!r}")


@dataclass
class ProblemSpec:
    n: int
    kind: str
    active: tuple
    f: Callable
    fprime: Callable
    k: int | None = None
    symmetric: bool = True
    linear: bool = True
    F: FSpec | None = None
    sources: list = field(default_factory=list)
    incremental_source: Callable | None = None
    description: str = ""

    def f_value(self, x, z: ext.GradedAltValue) -> ext.GradedAltValue:
        return ext.GradedAltValue.from_flat(self.n, self.f(np.atleast_2d(x), np.atleast_2d(z.to_flat())))

    def fprime_apply(self, x, z: ext.GradedAltValue, w: ext.GradedAltValue) -> ext.GradedAltValue:
        J = self.fprime(np.atleast_2d(x), np.atleast_2d(z.to_flat()))
        return ext.GradedAltValue.from_flat(self.n, np.einsum("qij,qj->qi", J, np.atleast_2d(w.to_flat())))

    def check_symmetry(self, samples=100, seed=0, scale=1.0) -> float:
        """max relative |f' - f'^T| over random (x, z) restricted to active degrees."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, size=(samples, self.n))
        z = scale * rng.normal(size=(samples, 2 ** self.n))
        J = self.fprime(x, z)
        mask = self.active_mask()
        J = J[:, mask][:, :, mask]
        den = max(1.0, float(np.max(np.abs(J))))
        return float(np.max(np.abs(J - np.swapaxes(J, 1, 2)))) / den

    def active_mask(self) -> np.ndarray:
        sl = degree_slices(self.n)
        mask = np.zeros(2 ** self.n, dtype=bool)
        for k in self.active:
            mask[sl[k]] = True
        return mask

    def fd_check(self, samples=20, seed=0, eps=1e-6) -> float:
        """Relative difference between fprime and central differences of f."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, size=(samples, self.n))
        z = rng.normal(size=(samples, 2 ** self.n))
        J = self.fprime(x, z)
        N = 2 ** self.n
        fd = np.zeros_like(J)
        for j in range(N):
            e = np.zeros(N)
            e[j] = eps
            fd[:, :, j] = (self.f(x, z + e) - self.f(x, z - e)) / (2 * eps)
        return float(np.max(np.abs(fd - J))) / max(1.0, float(np.max(np.abs(J))))


def _hl_like(n, k, F, rho_identity, kind):
    if not 0 <= k <= n:
        raise ValueError(f"form degree k={k} out of range for n={n}")
    F = make_F(n, k, F)
    sl = degree_slices(n)
    active = tuple(j for j in (k - 1, k, k + 1) if 0 <= j <= n)
    N = 2 ** n

    def f(x, z):
        out = np.zeros_like(z)
        if k >= 1:
            out[:, sl[k - 1]] = z[:, sl[k - 1]]
        out[:, sl[k]] = F.dF(x, z[:, sl[k]])
        if k < n and rho_identity:
            out[:, sl[k + 1]] = z[:, sl[k + 1]]
        return out

    def fprime(x, z):
        J = np.zeros((len(z), N, N))
        if k >= 1:
            J[:, sl[k - 1], sl[k - 1]] = np.eye(ext.dim(n, k - 1))
        J[:, sl[k], sl[k]] = F.d2F(x, z[:, sl[k]])
        if k < n and rho_identity:
            J[:, sl[k + 1], sl[k + 1]] = np.eye(ext.dim(n, k + 1))
        return J

    return ProblemSpec(n, kind, active, f, fprime, k=k, symmetric=True, linear=F.linear, F=F,
                       description=f"{kind} n={n} k={k} F={F.description}")


def make_hodge_laplace(n, k, F=None) -> ProblemSpec:
    """z = sigma + u + rho, H = |sigma|^2/2 + F(x, u) + |rho|^2/2."""
    return _hl_like(n, k, F, True, "hodge_laplace_semilinear")


def make_vvp(n, k, F=None) -> ProblemSpec:
    """Same blocks as Hodge-Laplace but without the |rho|^2/2 term (rho acts as a multiplier)."""
    return _hl_like(n, k, F, False, "vvp_stokes")


def make_maxwell_type(n, k, source=None) -> ProblemSpec:
    p = _hl_like(n, k, F_linear(n, k, source), False, "maxwell_type")
    return p


def make_hodge_dirac(n, fdata=None) -> ProblemSpec:
    """f(x, z) = fdata(x) independent of z; H = (fdata, z)."""
    N = 2 ** n
    if fdata is None:
        g = lambda x: np.zeros((len(x), N))
    elif callable(fdata):
        g = lambda x: np.asarray(fdata(x), dtype=float).reshape(len(x), N)
    else:
        const = np.asarray(fdata, dtype=float).reshape(N)
        g = lambda x: np.broadcast_to(const, (len(x), N)).copy()
    return ProblemSpec(n, "hodge_dirac_source", tuple(range(n + 1)),
                       lambda x, z: g(x), lambda x, z: np.zeros((len(z), N, N)),
                       symmetric=True, linear=True, description=f"hodge_dirac n={n}")


def make_hamiltonian_ode(dH, d2H, description="hamiltonian ode") -> ProblemSpec:
    """n = 1, z = q + p dt: Dz = -p' + q' dt = dH/dq + dH/dp dt.

    ``dH(t, q, p)`` returns (dH/dq, dH/dp) arrays and ``d2H`` the 2x2 Hessians.
    """
    def f(x, z):
        gq, gp = dH(x[:, 0], z[:, 0], z[:, 1])
        return np.stack([gq, gp], axis=1)

    def fprime(x, z):
        return np.asarray(d2H(x[:, 0], z[:, 0], z[:, 1]), dtype=float).reshape(len(z), 2, 2)

    return ProblemSpec(1, "hamiltonian_ode_1d", (0, 1), f, fprime, k=0, symmetric=True,
                       linear=False, description=description)


def make_oscillator(omega=1.0) -> ProblemSpec:
    """Harmonic oscillator H = (p^2 + omega^2 q^2)/2."""
    w2 = omega ** 2
    p = make_hamiltonian_ode(lambda t, q, p: (w2 * q, p),
                             lambda t, q, p: np.broadcast_to(np.diag([w2, 1.0]), (len(q), 2, 2)),
                             f"oscillator omega={omega}")
    p.linear = True
    return p


def manufactured_dirac_source(n, z_exact, dz_exact):
    """fdata = D z for an exact z given by callables.

    ``z_exact(x)`` is not needed for the source itself, but ``dz_exact(x)``
    must return D z in the flat layout; kept as a thin wrapper so callers
    state both.
    """
    return make_hodge_dirac(n, dz_exact)


def _as_increment(n, g):
    """Incremental source g(x, w) in flat layout plus its w-derivative."""
    N = 2 ** n
    if g is None:
        return (lambda x, w: np.zeros((len(x), N))), (lambda x, w: np.zeros((len(x), N, N)))
    if callable(g):
        return (lambda x, w: np.asarray(g(x), dtype=float).reshape(len(x), N)), \
               (lambda x, w: np.zeros((len(x), N, N)))
    g = np.asarray(g, dtype=float)
    if g.shape == (N, N):
        return (lambda x, w: w @ g.T), (lambda x, w: np.broadcast_to(g, (len(x), N, N)).copy())
    const = g.reshape(N)
    return (lambda x, w: np.broadcast_to(const, (len(x), N)).copy()), \
           (lambda x, w: np.zeros((len(x), N, N)))


def make_reciprocity_pair(problem: ProblemSpec, g1, g2, base=None):
    """Two linearized problems D w_i = f'(z_base) w_i + g_i(w_i).

    ``g_i`` is a constant flat vector, a callable x -> flat vector, or an
    (2^n, 2^n) matrix for a source linear in w.  ``base`` is a callable
    x -> flat z (defaults to z = 0, exact for linear problems).
    """
    n = problem.n
    zb = (lambda x: np.zeros((len(x), 2 ** n))) if base is None else base
    out = []
    for g in (g1, g2):
        gval, gjac = _as_increment(n, g)

        def f(x, w, gval=gval):
            J = problem.fprime(x, zb(x))
            return np.einsum("qij,qj->qi", J, w) + gval(x, w)

        def fp(x, w, gjac=gjac):
            return problem.fprime(x, zb(x)) + gjac(x, w)

        p = ProblemSpec(n, problem.kind, problem.active, f, fp, k=problem.k, symmetric=problem.symmetric,
                        linear=True, F=problem.F, description=problem.description + " (incremental)")
        p.incremental_source = gval
        out.append(p)
    return tuple(out)


def problem_from_json(data: dict) -> ProblemSpec:
    kind = data.get("kind")
    n = int(data["n"])
    if kind in ("hodge_laplace", "hodge_laplace_semilinear"):
        return make_hodge_laplace(n, int(data["k"]), data.get("F"))
    if kind in ("vvp", "vvp_stokes"):
        return make_vvp(n, int(data["k"]), data.get("F"))
    if kind == "maxwell_type":
        return make_maxwell_type(n, int(data["k"]), data.get("source"))
    if kind in ("hodge_dirac", "hodge_dirac_source"):
        return make_hodge_dirac(n, data.get("source"))
    if kind in ("oscillator", "hamiltonian_ode_1d"):
        if n != 1:
            raise ValueError("the Hamiltonian ODE lives on n = 1")
        return make_oscillator(float(data.get("omega", 1.0)))
    raise ValueError(f"unknown problem kind {kind!r}")
