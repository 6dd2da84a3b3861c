import warnings

import numpy as np
import pytest

from msfeec import mesh as M
from msfeec import problems as P
from msfeec.hybrid import (ConfigurationError, FluxConfig, afw_spaces, assemble, equal_order_spaces, linearized)
from msfeec.spaces import bracket_per_cell


def system(variant, problem, mesh, r=1, **flux):
    spaces = afw_spaces(problem, r) if variant == "AFW_H" else equal_order_spaces(problem, r)
    return assemble(problem, mesh, spaces, FluxConfig(variant, **flux))


def test_ldgh_dimension_accounting():
    s = system("LDG_H", P.make_hodge_laplace(2, 1), M.two_cell_mesh(2))
    assert s.space.dim == 2 * (3 + 6 + 3)
    assert s.ndof == s.space.dim + s.tan_space.dim


def test_afw_spaces_stable_pairs():
    p = P.make_hodge_laplace(2, 2)
    # P^-_1 Lambda^n coincides with P_0 Lambda^n
    assert afw_spaces(p, 0, "P") == {1: ("P", 1), 2: ("P-", 1)}
    assert afw_spaces(p, 0, "P-") == {1: ("P-", 1), 2: ("P-", 1)}
    q = P.make_hodge_laplace(2, 1)
    assert afw_spaces(q, 1, "P") == {0: ("P", 2), 1: ("P", 1), 2: ("P", 1)}


@pytest.mark.parametrize("variant", ["LDG_H", "IP_H", "NC_H_REDUCED", "XG", "AFW_H"])
def test_zero_data_gives_zero_solution(variant):
    s = system(variant, P.make_hodge_laplace(2, 1), M.two_cell_mesh(2))
    sol = s.solve(None)
    assert np.max(np.abs(sol.x)) < 1e-12


def test_oscillator_two_cells_unique_solution(rng):
    s = system("LDG_H", P.make_oscillator(), M.interval_mesh(2))
    sol = s.solve(s.random_boundary(rng))
    assert sol.metadata["residual"] <= 1e-10
    assert sol.metadata["deficiency"] == 0


def test_afw_k0_counterexample_mesh_accepts_any_data(rng):
    p = P.make_hodge_laplace(2, 0)
    s = assemble(p, M.equilateral_pair(2), {0: ("P", 1), 1: ("P", 0)}, FluxConfig("AFW_H"))
    for _ in range(3):
        sol = s.solve(s.random_boundary(rng))
        assert sol.metadata["residual"] <= 1e-10


def test_quadratic_F_converges_in_one_newton_step(rng):
    p = P.make_hodge_laplace(2, 1, {"type": "quadratic", "c": 2.0})
    s = system("LDG_H", p, M.two_cell_mesh(2))
    sol = s.newton_solve(s.random_boundary(rng))
    assert sol.metadata["iterations"] == 1


def test_linearized_systems():
    lin_p = P.make_hodge_laplace(2, 1, {"type": "quadratic", "c": 3.0})
    s = system("LDG_H", lin_p, M.two_cell_mesh(2))
    x = np.zeros(s.ndof)
    assert np.allclose(linearized(s)._frozen, s.jacobian(x))
    quartic = P.make_hodge_laplace(2, 1, {"type": "quartic", "c": 1.0})
    sq = system("LDG_H", quartic, M.two_cell_mesh(2))
    plain = system("LDG_H", P.make_hodge_laplace(2, 1), M.two_cell_mesh(2))
    # F'' vanishes at u = 0, so the linearization there is the F = 0 assembly
    assert np.allclose(linearized(sq)._frozen, plain.jacobian(np.zeros(plain.ndof)), atol=1e-12)


def test_jacobian_symmetry_semilinear(rng):
    p = P.make_hodge_laplace(2, 1, {"type": "quartic", "c": 1.0})
    s = system("LDG_H", p, M.two_cell_mesh(2))
    assert s.is_symmetric(rng.normal(size=s.ndof)) <= 1e-12


def test_ldgh_local_ms_two_triangles(rng):
    s = system("LDG_H", P.make_hodge_laplace(2, 1), M.two_cell_mesh(2))
    a, b = s.solve(s.random_boundary(rng)), s.solve(s.random_boundary(rng))
    br = bracket_per_cell(a.zhat, b.zhat)
    assert np.max(np.abs(br)) <= 1e-10 * a.zhat.norm() * b.zhat.norm()


def test_configuration_errors():
    with pytest.raises(ConfigurationError):
        FluxConfig("NOT_A_METHOD")
    with pytest.raises(ConfigurationError):
        system("IP_H", P.make_vvp(2, 1), M.two_cell_mesh(2))
    with pytest.raises(ConfigurationError):
        assemble(P.make_hodge_laplace(2, 1), M.two_cell_mesh(3), equal_order_spaces(P.make_hodge_laplace(2, 1), 1),
                 FluxConfig("LDG_H"))
    with pytest.raises(ConfigurationError):
        assemble(P.make_hodge_laplace(2, 1), M.two_cell_mesh(2), {0: ("P", 1)}, FluxConfig("LDG_H"))


def test_xg_penalty_product_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        system("XG", P.make_hodge_laplace(2, 0), M.two_cell_mesh(2), alpha={0: 2.0}, beta={0: 1.0})
    assert any("alpha*beta" in str(w.message) for w in caught)


def test_singular_system_reports_rank_deficiency(rng):
    # k = n Hodge-Laplace with harmonic constants on a pure-Neumann-like setup
    p = P.make_hodge_laplace(1, 1)
    s = system("LDG_H", p, M.interval_mesh(2))
    sol = s.solve(s.random_boundary(rng))
    assert "deficiency" in sol.metadata and sol.metadata["rank"] > 0


def test_flux_config_json_round_trip():
    cfg = FluxConfig("ldg-h", alpha={"0": {"1:0": 2.0, "default": 1.5}}, penalty_form="reduced_stabilization")
    back = FluxConfig.from_json(cfg.to_json())
    assert back.variant == "LDG_H"
    assert back.alpha_of(0, 1, 0) == 2.0 and back.alpha_of(0, 3, 1) == 1.5
    assert back.beta_of(0, 1, 0) == 0.5
    with pytest.raises(ConfigurationError):
        FluxConfig.from_json({"variant": "LDG_H", "bogus": 1})
