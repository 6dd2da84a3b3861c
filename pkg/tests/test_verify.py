import json
from math import sqrt

import numpy as np
import pytest

from msfeec import mesh as M
from msfeec import problems as P
from msfeec.hybrid import ConfigurationError, FluxConfig, afw_spaces, assemble, equal_order_spaces
from msfeec.problems import ProblemSpec
from msfeec.verify import (MSReport, cgh_counterexample, cgh_literal, conservativity, jump_identity, local_ms,
                           make_variations, null_space_variations, random_regions, reciprocity, strong_ms,
                           symplectic_1d, to_json_text, xg_equivalence)


def ldg(problem, mesh, r=1):
    return assemble(problem, mesh, equal_order_spaces(problem, r), FluxConfig("LDG_H"))


def test_entry_verdicts():
    rep = MSReport("X", "m", 0)
    rep.add("a", "c0", 1e-12, 1.0, 1e-10)
    rep.add("b", "c0", 1.0, 1.0, 1e-10, expect="nonzero")
    rep.add("c", "c0", 5.0, 1.0, 1e-10, asserted=False)
    assert [e.verdict for e in rep.entries] == ["pass", "pass", "recorded"]
    assert rep.passed
    rep.add("d", "c1", 1e-3, 1.0, 1e-10)
    assert not rep.passed and [e.check for e in rep.failures()] == ["d"]
    assert rep.to_csv().splitlines()[0] == "method,mesh,k,check,location,value,tol,verdict"


def test_variations_are_seed_deterministic():
    s = ldg(P.make_hodge_laplace(2, 1), M.two_cell_mesh(2))
    a, b = make_variations(s, seed=3), make_variations(s, seed=3)
    c = make_variations(s, seed=4)
    assert np.array_equal(a.first.x, b.first.x) and np.array_equal(a.second.x, b.second.x)
    assert not np.allclose(a.first.x, c.first.x)
    assert to_json_text({"r": local_ms(a)}) == to_json_text({"r": local_ms(b)})


def test_local_ms_and_jump_identity_ldgh():
    s = ldg(P.make_hodge_laplace(2, 1), M.eight_cell_mesh(2))
    pair = make_variations(s, seed=0)
    assert local_ms(pair).passed
    assert jump_identity(pair).passed
    assert conservativity(pair).passed


def test_null_space_cross_check():
    s = ldg(P.make_hodge_laplace(2, 0), M.two_cell_mesh(2))
    pair = null_space_variations(s, seed=1)
    assert local_ms(pair).passed


def test_nonsymmetric_fprime_is_flagged():
    base = P.make_hodge_laplace(2, 0)
    A = np.zeros((4, 4))
    A[0, 1], A[1, 0] = 1.0, -1.0
    A[1, 1] = A[2, 2] = 1.0
    A[0, 0] = 1.0

    def fp(x, z):
        return np.broadcast_to(A, (len(z), 4, 4)).copy()
    bad = ProblemSpec(2, base.kind, base.active, lambda x, z: z @ A.T, fp, k=0, symmetric=False,
                      description="asymmetric fixture")
    s = ldg(bad, M.eight_cell_mesh(2))
    rep = local_ms(make_variations(s, seed=0))
    assert "nonsymmetric_fprime" in rep.flags
    assert all(e.verdict == "recorded" for e in rep.entries)
    assert rep.max_ratio() > 1e-8


def test_afw_strong_equals_local_in_1d():
    p = P.make_hodge_laplace(1, 0)
    s = assemble(p, M.interval_mesh(4), afw_spaces(p, 1), FluxConfig("AFW_H"))
    pair = make_variations(s, seed=2)
    rep = strong_ms(pair, random_regions(s.mesh, 10, seed=0))
    assert rep.passed and all(e.asserted for e in rep.entries)


def test_random_regions_include_whole_mesh():
    m = M.eight_cell_mesh(2)
    regions = random_regions(m, count=10, seed=5)
    assert len(regions) >= 11
    assert tuple(range(m.num_cells)) in [tuple(sorted(r)) for r in regions]


def test_cgh_literal_matches_independent_values():
    # two-cell bracket of the explicit construction: -2|e|
    assert cgh_literal(2)["region"] == pytest.approx(-2.0, rel=1e-9)
    assert cgh_literal(3)["region"] == pytest.approx(-sqrt(3) / 2, rel=1e-9)
    assert cgh_literal(2, edge=2.0)["region"] == pytest.approx(-4.0, rel=1e-9)


@pytest.mark.parametrize("n", [2, 3])
def test_cgh_counterexample_report(n):
    rep = cgh_counterexample(n)
    assert rep.passed
    assert all(e.ok for e in rep.select("cgh_local"))
    region = rep.select("cgh_region")[0]
    assert region.expect == "nonzero" and abs(region.value) >= 1e6 * 1e-10 * region.scale


def test_reciprocity_zero_sources_and_swap():
    p = P.make_hodge_laplace(2, 1)
    mesh = M.two_cell_mesh(2)
    sp = equal_order_spaces(p, 1)
    fl = FluxConfig("LDG_H")
    g1, g2 = np.full(4, 1.0), np.full(4, -0.5)
    rep = reciprocity(p, mesh, sp, fl, g1, g2, seed=0)
    assert rep.passed
    zero = reciprocity(p, mesh, sp, fl, None, None, seed=0).metadata
    assert abs(zero["defect"] - zero["bracket"]) <= 1e-12
    d = rep.metadata["data"]
    swapped = reciprocity(p, mesh, sp, fl, g2, g1, data=(d[1], d[0])).metadata
    assert swapped["defect"] == pytest.approx(-rep.metadata["defect"], abs=1e-12)


def test_reciprocity_single_cell():
    p = P.make_hodge_laplace(2, 1)
    mesh = M.reference_simplex_mesh(2)
    rep = reciprocity(p, mesh, equal_order_spaces(p, 1), FluxConfig("LDG_H"), np.ones(4), np.full(4, 2.0))
    assert rep.passed


def test_xg_equivalence_and_guard():
    p = P.make_hodge_laplace(2, 0)
    mesh = M.two_cell_mesh(2)
    sp = equal_order_spaces(p, 1)
    assert xg_equivalence(p, mesh, sp, alpha=1.0)["discrepancy"] <= 1e-8
    assert xg_equivalence(p, mesh, sp, alpha=2.0, beta=0.5)["discrepancy"] <= 1e-8
    with pytest.raises(ConfigurationError):
        xg_equivalence(p, mesh, sp, alpha=1.0, beta=2.0)


def test_symplectic_single_cell_and_four_cells():
    osc = P.make_oscillator()
    one = assemble(osc, M.interval_mesh(1), afw_spaces(osc, 1), FluxConfig("AFW_H"))
    assert symplectic_1d(one, seed=0).passed
    four = ldg(osc, M.interval_mesh(4), r=1)
    rep = symplectic_1d(four, seed=0)
    assert rep.passed and len(rep.entries) >= 4


def test_json_report_is_sorted_and_parseable():
    s = ldg(P.make_hodge_laplace(2, 2), M.two_cell_mesh(2))
    text = to_json_text({"b": local_ms(make_variations(s)), "a": conservativity(make_variations(s))})
    data = json.loads(text)
    assert list(data) == sorted(data)
