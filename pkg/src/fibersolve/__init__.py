"""C^1 solutions of phi(phi(x)) = h(phi(f(x))) + g(x) by fiber contraction."""

from .conditions import Constants, ConditionReport, choose_parameters, estimate_constants, validate
from .expr import differentiate, eval_expr, parse_expr
from .gridfn import GridFunction, bound_estimate, eval_grid, lipschitz_estimate, make_grid, sup_dist
from .inverse import MonotoneMap, inverse_derivative, invert
from .solver import (
    ProblemSpec, SolutionPair, apply_lambda, apply_psi, build_problem,
    default_interval, iterate_fiber, zero_seed,
)
from .verify import (
    derivative_consistency, observed_contraction_ratio, residual, verify_solution,
)

__version__ = "0.1.0"
