"""Two variations of an LDG-H solution satisfy the multisymplectic law cell by cell.

A variation is a solution of the linearized problem.  For each cell K the
bracket [w1, w2] over the boundary of K pairs the hybrid traces of the
two variations.  The method conserves it: every per-cell value is at
round-off level relative to the product of the trace norms.
"""
import numpy as np

from msfeec import FluxConfig, assemble, equal_order_spaces, make_hodge_laplace, mesh
from msfeec.spaces import bracket_per_cell
from msfeec.verify import make_variations

problem = make_hodge_laplace(2, 1)             # vector Laplacian written for 1-forms
m = mesh.square_mesh(2)                        # 8 triangles
system = assemble(problem, m, equal_order_spaces(problem, 1), FluxConfig("LDG_H"))

pair = make_variations(system, seed=0)         # two solutions with random unit boundary data
w1, w2 = pair.zhat
values = bracket_per_cell(w1, w2)

print(f"unknowns: {system.ndof}, scale |w1||w2| = {pair.scale:.3f}")
for c, v in enumerate(values):
    print(f"  cell {c}: bracket = {v:+.2e}")
print(f"largest |bracket| / scale = {np.max(np.abs(values)) / pair.scale:.1e}")
