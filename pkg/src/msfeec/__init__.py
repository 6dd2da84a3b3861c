"""Hybrid finite element methods for canonical Hamiltonian PDEs in
exterior-calculus form, with numerical checks of the multisymplectic
conservation law satisfied by their numerical traces."""

from . import exterior, mesh, polyforms, problems, quadrature, spaces, hybrid, verify, suites  # noqa: E402
from .hybrid import (ConfigurationError, ConvergenceError, FluxConfig, HybridSolution, NumericError,  # noqa: E402
                     afw_spaces, assemble, equal_order_spaces, linearized, newton_solve, solve)
from .mesh import MeshError, SimplicialMesh, build_mesh, load_mesh  # noqa: E402
from .problems import (make_hodge_dirac, make_hodge_laplace, make_maxwell_type, make_oscillator,  # noqa: E402
                       make_vvp, problem_from_json)
from .spaces import FacetField, TracePair, bracket, bracket_per_cell, jump, average  # noqa: E402
from .verify import MSEntry, MSReport, make_variations  # noqa: E402
from .suites import CRITERIA, run_suite  # noqa: E402

__version__ = "0.1.0"
