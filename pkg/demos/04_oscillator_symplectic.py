"""In one dimension the multisymplectic law is ordinary symplecticity.

The harmonic oscillator q' = p, p' = -q on [0, 1] is discretized on four
cells.  For two variations (dq1, dp1) and (dq2, dp2) the symplectic form
dq1 dp2 - dq2 dp1 is evaluated from the hybrid traces at each vertex.
Both AFW-H with P2 and LDG-H with P1 keep it constant from vertex to vertex.
"""
from msfeec import FluxConfig, afw_spaces, assemble, equal_order_spaces, make_oscillator, mesh
from msfeec.verify import make_variations, symplectic_1d, vertex_symplectic_values

problem = make_oscillator(1.0)
m = mesh.interval_mesh(4)
for label, spaces, flux in (("AFW-H P2", afw_spaces(problem, 1), FluxConfig("AFW_H")),
                            ("LDG-H P1", equal_order_spaces(problem, 1), FluxConfig("LDG_H"))):
    system = assemble(problem, m, spaces, flux)
    values = vertex_symplectic_values(make_variations(system, seed=0))
    print(label, "omega at vertices:", " ".join(f"x={x:.2f}:{v:+.12f}" for x, v in values))
    print("   drift check passes:", symplectic_1d(system, seed=0).passed)
