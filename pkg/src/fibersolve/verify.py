"""Checks of a computed solution against the original equation.

Nothing here inverts ``h`` or ``f``: the residual is evaluated on the
forward form ``phi(phi(x)) - h(phi(f(x))) - g(x)``, so it is independent of
the solver's inversion path.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .expr import eval_expr
from .gridfn import GridFunction, bound_estimate, lipschitz_estimate

__all__ = [
    "VerificationReport", "InsufficientTrace",
    "residual", "residual_points", "derivative_consistency",
    "observed_contraction_ratio", "verify_solution",
]

EPS = np.finfo(float).eps


class InsufficientTrace(ValueError):
    pass


def residual_points(p, n_check):
    """Check points on ``[-A/2, A/2]`` whose image ``f(x)`` stays in ``[-A, A]``.

    Outside the grid a grid function is only a constant extension, so
    ``phi(f(x))`` carries no information once ``f(x)`` leaves ``[-A, A]``.
    Returns ``(points, n_excluded)``.
    """
    if n_check < 2:
        raise ValueError("n_check must be at least 2")
    xs = np.linspace(-p.A / 2, p.A / 2, int(n_check))
    keep = np.abs(eval_expr(p.f, xs)) <= p.A
    if not keep.any():
        raise ValueError("no check point maps into the grid window under f")
    return xs[keep], int(np.count_nonzero(~keep))


def residual(phi: GridFunction, p, n_check=2001):
    """Sup and argmax of ``|phi(phi(x)) - h(phi(f(x))) - g(x)|``."""
    xs, _ = residual_points(p, n_check)
    r = np.abs(phi(phi(xs)) - eval_expr(p.h, phi(eval_expr(p.f, xs)))
               - eval_expr(p.g, xs))
    i = int(np.argmax(r))
    return float(r[i]), float(xs[i])


def derivative_consistency(phi: GridFunction, Phi: GridFunction, step: float) -> float:
    """Max ``|central difference of phi - Phi|`` over interior nodes.

    ``step`` must be at least twice the grid spacing; below that the
    difference quotient only sees single interpolation segments.
    """
    if not step >= 2 * phi.spacing * (1 - 1e-9):  # spacing carries rounding
        raise ValueError(f"step {step:g} is below twice the grid spacing {phi.spacing:g}")
    x = phi.nodes
    x = x[(x - step >= x[0]) & (x + step <= x[-1])]
    if x.size == 0:
        raise ValueError("step too large for the grid")
    cd = (phi(x + step) - phi(x - step)) / (2 * step)
    return float(np.max(np.abs(cd - Phi(x))))


def observed_contraction_ratio(trace, burn_in: int) -> float:
    """Largest ``delta_{n+1} / delta_n`` of the phi-deltas after ``burn_in``.

    Ratios whose denominator is below ``100 eps`` are skipped, since those
    deltas are rounding noise.
    """
    d = trace.deltas_phi if hasattr(trace, "deltas_phi") else list(trace)
    if len(d) < burn_in + 3:
        raise InsufficientTrace(
            f"trace has {len(d)} steps; burn-in {burn_in} needs {burn_in + 3}")
    ratios = [d[i + 1] / d[i] for i in range(burn_in, len(d) - 1)
              if d[i] >= 100 * EPS]
    return max(ratios, default=0.0)


@dataclass(frozen=True)
class VerificationReport:
    residual_sup: float
    residual_argmax: float
    derivative_mismatch_sup: float
    lipschitz_of_solution: float
    derivative_bound: float
    observed_ratio: float
    theoretical_factor: float
    # bookkeeping: how the numbers above were obtained
    residual_points: int
    residual_excluded: int
    fd_step: float
    ratio_burn_in: int

    def to_json(self):
        return asdict(self)


def verify_solution(sol, p, n_check=None, step=None, burn_in=5) -> VerificationReport:
    """Run every check on a :class:`~fibersolve.solver.SolutionPair`.

    ``step`` defaults to ten grid spacings. When the trace is too short for
    the requested burn-in, the burn-in is reduced; with fewer than three
    steps no ratio is observable and 0 is reported.
    """
    phi, Phi = sol.phi_star, sol.Phi_star
    n_check = n_check or p.grid_n
    step = step or 10 * phi.spacing
    pts, excluded = residual_points(p, n_check)
    r_sup, r_arg = residual(phi, p, n_check)
    burn = min(burn_in, len(sol.trace) - 3)
    ratio = observed_contraction_ratio(sol.trace, burn) if burn >= 0 else 0.0
    return VerificationReport(
        residual_sup=r_sup,
        residual_argmax=r_arg,
        derivative_mismatch_sup=derivative_consistency(phi, Phi, step),
        lipschitz_of_solution=lipschitz_estimate(phi),
        derivative_bound=bound_estimate(Phi),
        observed_ratio=ratio,
        theoretical_factor=sol.report.factor,
        residual_points=pts.size,
        residual_excluded=excluded,
        fd_step=step,
        ratio_burn_in=max(burn, 0),
    )
