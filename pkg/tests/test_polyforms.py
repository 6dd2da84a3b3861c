import numpy as np
import pytest

from msfeec import exterior as ext
from msfeec import mesh as M
from msfeec.mesh import Simplex
from msfeec.polyforms import (ConfigurationError, FacetPolyForm, FormSpaceSpec, PolyDiffForm, basis, basis_stack,
                              codiff, ext_d, facet_fit, l2_cell, l2_facet, trace_nor, trace_tan)

TRI = Simplex(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


def form(simplex, k, r, func):
    return PolyDiffForm.from_function(simplex, k, r, func)


def random_form(simplex, k, r, rng):
    return PolyDiffForm(simplex, k, r, rng.normal(size=(len(basis(FormSpaceSpec("P", r, 0), simplex)),
                                                        ext.dim(simplex.n, k))))


def at(w, x):
    return w(np.atleast_2d(np.asarray(x, dtype=float)))[0]


@pytest.mark.parametrize("family,r,k,count", [("P", 1, 0, 3), ("P-", 1, 1, 3), ("P", 0, 2, 1), ("P", 2, 1, 12),
                                              ("P-", 2, 1, 8), ("P-", 1, 2, 1)])
def test_basis_dimensions_triangle(family, r, k, count):
    spec = FormSpaceSpec(family, r, k)
    assert len(basis(spec, TRI)) == count == spec.dimension(2)


@pytest.mark.parametrize("n,family,r,k", [(3, "P-", 1, 1), (3, "P-", 2, 2), (3, "P", 2, 1), (1, "P-", 3, 1)])
def test_basis_dimensions_formula(n, family, r, k):
    S = M.reference_simplex_mesh(n).simplices[0]
    spec = FormSpaceSpec(family, r, k)
    B = basis_stack(spec, S)
    flat = B.coeffs.reshape(len(B), -1)
    assert len(B) == spec.dimension(n) == np.linalg.matrix_rank(flat)


def test_whitney_forms_have_constant_normal_trace_on_edges():
    # P1- Lambda^1 tangential traces are constants on each edge
    m = M.reference_simplex_mesh(2)
    for w in basis(FormSpaceSpec("P-", 1, 1), m.simplices[0]):
        for f in range(3):
            t = trace_tan(w, m, f, 0)
            x, sq, _ = m.geometry[f].quadrature(4)
            v = t(sq)
            assert np.allclose(v, v[0])


def test_bad_space_configurations():
    with pytest.raises(ConfigurationError):
        FormSpaceSpec("Q", 1, 0)
    with pytest.raises(ConfigurationError):
        FormSpaceSpec("P-", 0, 1)


def test_exterior_derivative_examples():
    x1 = form(TRI, 0, 1, lambda x: x[:, :1])
    assert np.allclose(at(ext_d(x1), [0.3, 0.2]), [1.0, 0.0])
    x1dx2 = form(TRI, 1, 1, lambda x: np.stack([0 * x[:, 0], x[:, 0]], axis=1))
    assert np.allclose(at(ext_d(x1dx2), [0.1, 0.6]), [1.0])


def test_codifferential_examples():
    w = form(TRI, 1, 1, lambda x: x.copy())
    assert np.allclose(at(codiff(w), [0.2, 0.2]), [-2.0])
    const = form(TRI, 2, 0, lambda x: np.ones((len(x), 1)))
    assert np.allclose(codiff(const).coeffs, 0.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dd_and_deltadelta_vanish(n, rng):
    S = M.reference_simplex_mesh(n).simplices[0]
    for k in range(n + 1):
        w = random_form(S, k, 3, rng)
        if k <= n - 2:
            assert np.max(np.abs(ext_d(ext_d(w)).coeffs)) < 1e-13
        if k >= 2:
            assert np.max(np.abs(codiff(codiff(w)).coeffs)) < 1e-13


def test_l2_examples():
    one = form(TRI, 0, 0, lambda x: np.ones((len(x), 1)))
    assert l2_cell(one, one) == pytest.approx(0.5)
    dx1 = form(TRI, 1, 0, lambda x: np.tile([1.0, 0.0], (len(x), 1)))
    assert l2_cell(dx1, dx1) == pytest.approx(0.5)
    seg = M.interval_mesh(1).simplices[0]
    m = M.build_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, -1.0]], [[0, 1, 2]])
    f = m.facet_lookup[(0, 1)]
    geom = m.geometry[f]
    x, s, w = geom.quadrature(4)
    one_f = FacetPolyForm(geom, 0, 0, facet_fit(geom, 0, 0, np.ones((len(x), 1)), 4))
    xf = FacetPolyForm(geom, 0, 1, facet_fit(geom, 0, 1, x[:, :1], 4))
    assert l2_facet(one_f, xf) == pytest.approx(0.5)
    assert seg.volume == pytest.approx(1.0)


def test_trace_examples():
    # facet [(0,0),(1,0)] with the third vertex below: outward normal +e2
    m = M.build_mesh([[0.0, 0.0], [1.0, 0.0], [0.0, -1.0]], [[0, 1, 2]])
    f = m.facet_lookup[(0, 1)]
    assert np.allclose(m.sides[(f, 0)].normal, [0.0, 1.0])
    S = m.simplices[0]
    _, sq, _ = m.geometry[f].quadrature(2)
    c = form(S, 0, 0, lambda x: 3.0 * np.ones((len(x), 1)))
    assert np.allclose(trace_tan(c, m, f, 0)(sq), 3.0)
    dx1 = form(S, 1, 0, lambda x: np.tile([1.0, 0.0], (len(x), 1)))
    tangent = m.geometry[f].frame[:, 0]
    assert np.allclose(trace_tan(dx1, m, f, 0)(sq), tangent[0])
    dx2 = form(S, 1, 0, lambda x: np.tile([0.0, 1.0], (len(x), 1)))
    assert np.allclose(trace_nor(dx2, m, f, 0)(sq), 1.0)
    # vertical facet kills dx1
    g = m.facet_lookup[(0, 2)]
    _, sq2, _ = m.geometry[g].quadrature(2)
    assert np.allclose(trace_tan(dx1, m, g, 0)(sq2), 0.0)
    with pytest.raises(ValueError):
        trace_nor(c, m, f, 0)


def test_one_dimensional_normal_trace_signs():
    m = M.interval_mesh(1, 0.0, 1.0)
    S = m.simplices[0]
    w = form(S, 1, 0, lambda x: 2.5 * np.ones((len(x), 1)))
    right = [f for f in range(m.num_facets) if m.geometry[f].centroid[0] > 0.5][0]
    left = 1 - right
    one = np.zeros((1, 0))
    assert np.allclose(trace_nor(w, m, right, 0)(one), 2.5)
    assert np.allclose(trace_nor(w, m, left, 0)(one), -2.5)
