from math import factorial

import numpy as np
import pytest

from msfeec.quadrature import mapped_rule, reference_rule, reference_volume


def monomial_integral(e):
    """Integral of prod x_i^e_i over the reference simplex."""
    return np.prod([factorial(a) for a in e]) / factorial(sum(e) + len(e))


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("degree", [0, 1, 3, 6])
def test_reference_rule_exactness(m, degree):
    x, w = reference_rule(m, degree)
    assert w.sum() == pytest.approx(reference_volume(m))
    rng = np.random.default_rng(m * 10 + degree)
    for _ in range(5):
        e = rng.multinomial(degree, np.ones(m + 1) / (m + 1))[:m]
        got = np.sum(w * np.prod(x ** e, axis=1))
        assert got == pytest.approx(monomial_integral(e), rel=1e-12, abs=1e-15)


def test_mapped_rule_area():
    V = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
    x, w = mapped_rule(V, 2)
    assert w.sum() == pytest.approx(3.0)
    assert np.sum(w * x[:, 0]) == pytest.approx(3.0 * 2.0 / 3.0)
