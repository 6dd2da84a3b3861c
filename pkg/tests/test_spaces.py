import numpy as np
import pytest

from msfeec import exterior as ext
from msfeec import mesh as M
from msfeec.polyforms import FacetPolyForm, PolyDiffForm
from msfeec.spaces import FacetField, average, bracket, form_traces, jump, pair


def smooth_form_traces(mesh, degrees, r=2):
    """Traces of one global polynomial form, restricted cell by cell."""
    n = mesh.n

    def func(j):
        def g(x):
            cols = [np.sin(0.3 * (c + 1)) + x[:, 0] * (c + 1) - 0.5 * x[:, -1] ** 2
                    for c in range(ext.dim(n, j))]
            return np.stack(cols, axis=1)
        return g
    forms = {(c, j): PolyDiffForm.from_function(S, j, r, func(j))
             for c, S in enumerate(mesh.simplices) for j in degrees}
    return form_traces(forms, mesh)


def random_field(mesh, degrees, rng, r=1):
    F = FacetField(mesh)
    for f, s in mesh.all_sides():
        geom = mesh.geometry[f]
        for j in degrees:
            shape = (FacetPolyForm.zeros(geom, j, r).coeffs.shape)
            F.set(f, s, FacetPolyForm(geom, j, r, rng.normal(size=shape), f, s))
    return F


def test_smooth_forms_have_no_interior_jumps():
    mesh = M.eight_cell_mesh(2)
    tr = smooth_form_traces(mesh, (0, 1, 2))
    interior = [(f, s) for f in mesh.interior_facets() for s in (0, 1)]
    assert jump(tr.tan, "tangential").norm(interior) < 1e-12
    assert jump(tr.nor, "normal").norm(interior) < 1e-12
    assert average(tr.tan, "tangential").norm(interior) > 0.1


def test_boundary_rows(rng):
    mesh = M.square_mesh(1)
    g = random_field(mesh, (0, 1), rng)
    bnd = [(f, 0) for f in mesh.boundary_facets()]
    assert average(g, "tangential").norm(bnd) == 0.0
    assert (jump(g, "tangential") - g).norm(bnd) == pytest.approx(0.0, abs=1e-15)
    assert jump(g, "normal").norm(bnd) == 0.0
    assert (average(g, "normal") - g).norm(bnd) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_average_jump_decomposition(n, rng):
    mesh = M.eight_cell_mesh(n) if n < 3 else M.cube_mesh(1)
    a = random_field(mesh, range(n), rng)
    b = random_field(mesh, range(n), rng)
    lhs = pair(a, b)
    rhs = pair(average(a, "normal"), jump(b, "tangential")) + pair(jump(a, "normal"), average(b, "tangential"))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_pair_with_zero_and_bracket_antisymmetry(rng):
    mesh = M.square_mesh(1)
    b = random_field(mesh, (0, 1), rng)
    assert pair(0.0 * b, b) == 0.0
    tr = smooth_form_traces(mesh, (0, 1, 2))
    assert abs(bracket(tr, tr)) < 1e-14


def test_one_dimensional_telescoping():
    mesh = M.interval_mesh(2)
    forms = {}
    for c, S in enumerate(mesh.simplices):
        forms[(c, 0)] = PolyDiffForm.from_function(S, 0, 0, lambda x: np.ones((len(x), 1)))
        forms[(c, 1)] = PolyDiffForm.from_function(S, 1, 0, lambda x: np.ones((len(x), 1)))
    tr = form_traces(forms, mesh)
    assert pair(tr.nor, tr.tan) == pytest.approx(0.0, abs=1e-14)
    interior = [(f, s) for f in mesh.interior_facets() for s in (0, 1)]
    assert pair(tr.nor, tr.tan, interior) == pytest.approx(0.0, abs=1e-14)


def test_facet_field_json_round_trip(rng):
    mesh = M.square_mesh(1)
    g = random_field(mesh, (0, 1), rng)
    back = FacetField.from_json(mesh, g.to_json())
    assert (back - g).norm() == pytest.approx(0.0, abs=1e-15)
