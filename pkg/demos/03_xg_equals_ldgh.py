"""XG is LDG-H in disguise when the two penalties multiply to one.

XG uses separate tangential and normal trace unknowns with penalties
alpha and beta.  With alpha * beta = 1 on interior facets its solution
coincides with the LDG-H solution for the same data.  Choosing beta
otherwise breaks the identity, and the comparison refuses to run.
"""
from msfeec import ConfigurationError, equal_order_spaces, make_hodge_laplace, mesh
from msfeec.verify import xg_equivalence

m = mesh.square_mesh(2)
for k in (0, 1):
    problem = make_hodge_laplace(2, k)
    for alpha in (1.0, 2.0):
        res = xg_equivalence(problem, m, equal_order_spaces(problem, 1), alpha=alpha)
        print(f"k={k} alpha={alpha}: max coefficient difference {res['discrepancy']:.1e}")

try:
    xg_equivalence(make_hodge_laplace(2, 0), m, equal_order_spaces(make_hodge_laplace(2, 0), 1),
                   alpha=1.0, beta=3.0)
except ConfigurationError as exc:
    print("alpha*beta != 1:", exc)
