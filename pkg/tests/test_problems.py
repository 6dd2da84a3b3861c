import numpy as np
import pytest

from msfeec import problems as P
from msfeec.mesh import Simplex
from msfeec.polyforms import PolyDiffForm, codiff, ext_d


def test_linear_hodge_laplace_blocks():
    p = P.make_hodge_laplace(2, 1)
    J = p.fprime(np.zeros((1, 2)), np.zeros((1, 4)))[0]
    assert np.allclose(J, np.diag([1.0, 0.0, 0.0, 1.0]))
    assert p.linear and p.k == 1


def test_quadratic_mass_coefficient():
    p = P.make_hodge_laplace(2, 1, {"type": "quadratic", "c": 3.0})
    J = p.fprime(np.zeros((1, 2)), np.zeros((1, 4)))[0]
    assert np.allclose(J, np.diag([1.0, 3.0, 3.0, 1.0]))


def test_quartic_hessian_matches_closed_form():
    p = P.make_hodge_laplace(2, 1, {"type": "quartic", "c": 1.0})
    u = np.array([0.5, -1.0])
    J = p.fprime(np.zeros((1, 2)), np.array([[0.0, *u, 0.0]]))[0][1:3, 1:3]
    expected = np.dot(u, u) * np.eye(2) + 2 * np.outer(u, u)
    assert np.allclose(J, expected)
    assert not p.linear
    assert p.fd_check() < 1e-6
    assert p.check_symmetry() <= 1e-12


def test_vvp_has_no_rho_mass():
    v = P.make_vvp(3, 2)
    J = v.fprime(np.zeros((1, 3)), np.zeros((1, 8)))[0]
    assert np.allclose(J[4:7, 4:7], 0.0)
    assert v.active == (1, 2, 3)


def test_hodge_dirac_residual_of_exact_solution():
    # z = (1 + t^2) + t^3 dt, so D z = -3 t^2 + 2 t dt
    S = Simplex(np.array([[0.0], [1.0]]))
    q = PolyDiffForm.from_function(S, 0, 3, lambda x: 1 + x[:, :1] ** 2)
    p = PolyDiffForm.from_function(S, 1, 3, lambda x: x[:, :1] ** 3)
    prob = P.make_hodge_dirac(1, lambda x: np.concatenate([-3 * x ** 2, 2 * x], axis=1))
    x = np.linspace(0, 1, 7)[:, None]
    Dz = np.concatenate([codiff(p)(x), ext_d(q)(x)], axis=1)
    assert np.allclose(Dz, prob.f(x, np.zeros((len(x), 2))), atol=1e-12)
    assert prob.check_symmetry() == 0.0
    zero = P.make_hodge_dirac(2)
    assert np.allclose(zero.f(np.zeros((3, 2)), np.ones((3, 4))), 0.0)


def test_oscillator_and_problem_json():
    osc = P.problem_from_json({"kind": "oscillator", "n": 1, "omega": 2.0})
    J = osc.fprime(np.zeros((1, 1)), np.zeros((1, 2)))[0]
    assert np.allclose(J, np.diag([4.0, 1.0]))
    hl = P.problem_from_json({"kind": "hodge_laplace", "n": 3, "k": 2, "F": {"type": "quadratic", "c": 2.0}})
    assert (hl.n, hl.k) == (3, 2)
    with pytest.raises(ValueError):
        P.problem_from_json({"kind": "nonsense", "n": 2})
    with pytest.raises(ValueError):
        P.problem_from_json({"kind": "oscillator", "n": 2})


def test_reciprocity_pair_sources():
    base = P.make_hodge_laplace(2, 1)
    p1, p2 = P.make_reciprocity_pair(base, np.ones(4), np.zeros(4))
    x = np.zeros((2, 2))
    w = np.ones((2, 4))
    assert np.allclose(p1.f(x, w) - p2.f(x, w), 1.0)
    assert p1.linear and p2.linear
