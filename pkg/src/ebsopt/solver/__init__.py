"""Bundled MIP machinery: dense dual-simplex branch-and-bound, lexicographic
two-stage optimization, exact PWL of separable quadratics, and the external
solver backend protocol."""

from .backend import ENV_VAR, BackendError, backend_available, solve_external
from .branch_bound import Solution, SolverError, SolverOptions, solve, solve_lexicographic
from .kernels import BACKEND as KERNEL_BACKEND
from .pwl import LinearizationError, PwlFragment, linearize_separable_quadratic
from .simplex import NumericalError

__all__ = [
    "Solution", "SolverError", "SolverOptions", "solve", "solve_lexicographic",
    "PwlFragment", "LinearizationError", "linearize_separable_quadratic",
    "NumericalError", "BackendError", "backend_available", "solve_external",
    "ENV_VAR", "KERNEL_BACKEND",
]
