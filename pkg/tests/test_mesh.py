import json
from math import sqrt

import numpy as np
import pytest

from msfeec import mesh as M
from msfeec.mesh import MeshError


def test_interval_and_square_facet_counts():
    m = M.interval_mesh(2)
    assert (m.num_facets, len(m.interior_facets())) == (3, 1)
    s = M.square_mesh(1)
    assert (s.num_facets, len(s.interior_facets())) == (5, 1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_reference_simplex(n):
    m = M.reference_simplex_mesh(n)
    assert m.num_facets == n + 1
    assert not m.interior_facets()
    assert m.simplices[0].volume == pytest.approx(1.0 / [1, 1, 2, 6][n])


def test_equilateral_pair_geometry():
    m2 = M.equilateral_pair(2)
    assert (m2.num_cells, m2.num_facets, len(m2.interior_facets())) == (2, 5, 1)
    lengths = [g.measure for g in m2.geometry]
    assert np.allclose(lengths, 1.0)
    m1 = M.equilateral_pair(1)
    assert np.allclose([s.volume for s in m1.simplices], m1.simplices[0].volume)
    m3 = M.equilateral_pair(3, edge=2.0)
    shared = m3.interior_facets()[0]
    assert m3.geometry[shared].measure == pytest.approx(sqrt(3) / 4 * 4.0)


def test_region_boundary_examples():
    m = M.equilateral_pair(2)
    assert sorted(m.region_boundary([0])) == sorted(m.cell_sides(0))
    both = m.region_boundary([0, 1])
    assert len(both) == 4
    assert sorted(f for f, _ in both) == sorted(m.boundary_facets())
    with pytest.raises(ValueError):
        m.region_boundary([])


def test_outward_normals_point_away_from_cell():
    m = M.eight_cell_mesh(2)
    for (f, s), side in m.sides.items():
        c = m.simplices[side.cell].centroid
        assert np.dot(m.geometry[f].centroid - c, side.normal) > 0
        assert np.linalg.norm(side.normal) == pytest.approx(1.0)


def test_interior_sides_have_opposite_normals():
    m = M.cube_mesh(1)
    for f in m.interior_facets():
        assert np.allclose(m.sides[(f, 0)].normal, -m.sides[(f, 1)].normal)


def test_json_round_trip(tmp_path):
    m = M.eight_cell_mesh(2)
    p = tmp_path / "m.json"
    M.save_mesh(m, p)
    back = M.load_mesh(p)
    assert np.allclose(back.vertices, m.vertices)
    assert (back.cells == m.cells).all()


@pytest.mark.parametrize("data,msg", [
    ({"n": 2, "vertices": [[0, 0], [1, 0], [0, 1]]}, "cells"),
    ({"n": 2, "vertices": [[0, 0], [1, 0], [0, 1]], "cells": [[0, 1, 5]]}, "missing vertex"),
    ({"n": 2, "vertices": [[0, 0], [1, 0], [2, 0]], "cells": [[0, 1, 2]]}, "degenerate"),
    ({"n": 2, "vertices": [[0, 0], [1, 0], [0, 1]], "cells": [[0, 1]]}, "expected 3"),
])
def test_malformed_meshes(data, msg):
    with pytest.raises(MeshError, match=msg):
        M.mesh_from_json(data)


def test_facet_shared_by_three_cells_rejected():
    V = [[0, 0], [1, 0], [0, 1], [0, -1], [-1, 0.5]]
    with pytest.raises(MeshError, match="more than two"):
        M.build_mesh(V, [[0, 1, 2], [0, 1, 3], [0, 1, 4]])
