import numpy as np
import pytest

from msfeec import exterior as ext
from msfeec.exterior import GradedAltValue, basis_form, hodge, inner, ms_form, wedge


def random_graded(n, rng):
    return GradedAltValue(n, [rng.normal(size=ext.dim(n, k)) for k in range(n + 1)])


def test_dimensions_and_basis_order():
    assert [ext.dim(3, k) for k in range(4)] == [1, 3, 3, 1]
    assert list(ext.multi_indices(3, 2)) == [(1, 2), (1, 3), (2, 3)]


def test_wedge_examples():
    e12 = wedge(basis_form(2, (1,)), basis_form(2, (2,)))
    assert np.allclose(e12.degree(2), [1.0])
    assert np.allclose(wedge(basis_form(2, (1,)), basis_form(2, (1,))).degree(2), [0.0])
    a = basis_form(3, (1,)) + basis_form(3, (2,))
    out = wedge(a, basis_form(3, (2, 3)))
    assert np.allclose(out.degree(3), [1.0])


def test_hodge_examples():
    assert np.allclose(hodge(basis_form(2, (1,))).degree(1), [0.0, 1.0])
    assert np.allclose(hodge(basis_form(2, (2,))).degree(1), [-1.0, 0.0])
    for n in (1, 2, 3):
        assert np.allclose(hodge(basis_form(n, ())).degree(n), [1.0])


def test_inner_examples():
    assert inner(basis_form(2, (1,)), basis_form(2, (1,))) == pytest.approx(1.0)
    assert inner(basis_form(2, (1,)), basis_form(2, (2,))) == pytest.approx(0.0)
    a = 2 * basis_form(3, (1, 2)) + basis_form(3, (1, 3))
    b = basis_form(3, (1, 2)) - basis_form(3, (1, 3))
    assert inner(a, b) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hodge_involution_sign_and_compatibility(n, rng):
    for k in range(n + 1):
        a = GradedAltValue.pure(n, k, rng.normal(size=ext.dim(n, k)))
        b = GradedAltValue.pure(n, k, rng.normal(size=ext.dim(n, k)))
        assert np.allclose(hodge(hodge(a)).degree(k), (-1) ** (k * (n - k)) * a.degree(k), atol=1e-14)
        assert np.allclose(wedge(a, hodge(b)).degree(n), inner(a, b), atol=1e-13)


def test_ms_form_examples(rng):
    w = random_graded(3, rng)
    assert np.allclose(ms_form(w, w).degree(2), 0.0)
    q1, p1, q2, p2 = rng.normal(size=4)
    w1 = GradedAltValue(1, [[q1], [p1]])
    w2 = GradedAltValue(1, [[q2], [p2]])
    assert ms_form(w1, w2).degree(0)[0] == pytest.approx(q1 * p2 - q2 * p1)
    out = ms_form(basis_form(2, (1,)), basis_form(2, ()))
    assert np.allclose(out.degree(1), [0.0, -1.0])


def test_graded_value_validation():
    with pytest.raises(ValueError):
        GradedAltValue(2, [np.zeros(1), np.zeros(3), np.zeros(1)])
    with pytest.raises(ValueError):
        GradedAltValue.from_flat(2, np.zeros(3))
    v = GradedAltValue.from_flat(2, np.arange(4.0))
    assert np.allclose(v.to_flat(), np.arange(4.0))
