"""Weak but not strong conservation: the continuous Galerkin hybrid method.

Two equilateral triangles share an edge e.  Laplace's equation is solved
with continuous P1 elements and the hybrid normal trace is recovered
cell by cell.  Each cell conserves the bracket, yet over the union of the
two cells it equals -2|e|, because the recovered normal flux jumps
across e.  The same holds for two regular tetrahedra, where |e| = sqrt(3)/4.
"""
from math import sqrt

from msfeec.verify import cgh_counterexample, cgh_literal

for n, expected in ((2, -2.0), (3, -2 * sqrt(3) / 4)):
    rep = cgh_counterexample(n)
    local = max(abs(e.value) for e in rep.select("cgh_local"))
    region = rep.select("cgh_region")[0].value
    literal = cgh_literal(n)["region"]
    print(f"n={n}: largest per-cell bracket {local:.1e}")
    print(f"      two-cell bracket {region:+.12f} (hand construction {literal:+.12f}, expected {expected:+.12f})")
    print(f"      all checks pass: {rep.passed}")
