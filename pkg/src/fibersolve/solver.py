"""Fiber-contraction iteration for ``phi(phi(x)) = h(phi(f(x))) + g(x)``.

Since ``h`` and ``f`` are bijections the equation is equivalent to the fixed
point problem ``phi = Lam(phi)`` with::

    Lam(phi) = h^{-1} o (phi o phi o f^{-1} - g o f^{-1})

and differentiating that identity gives the derivative operator::

    Psi(phi, Phi) = (h^{-1})' o (phi o phi o f^{-1} - g o f^{-1})
                    * (Phi o phi o f^{-1} * Phi o f^{-1} - g' o f^{-1})
                    * (f^{-1})'

The pair map ``Gamma(phi, Phi) = (Lam(phi), Psi(phi, Phi))`` is a fiber
contraction, so iterating it from any admissible seed converges to the
solution together with its derivative.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .conditions import (
    ConditionReport, Constants, estimate_constants, merge_constants, validate,
)
from .expr import Expr, differentiate, eval_expr, parse_expr
from .gridfn import (
    GridFunction, bound_estimate, lipschitz_estimate, make_grid, sup_dist,
)
from .inverse import DEFAULT_TOL, MonotoneMap, invert

__all__ = [
    "ProblemSpec", "StepRecord", "IterationTrace", "SolutionPair",
    "SolverError", "MaxIterExceeded", "MembershipDrift", "InvariantViolation",
    "build_problem", "default_interval", "apply_lambda", "apply_psi",
    "iterate_fiber", "zero_seed",
]

log = logging.getLogger(__name__)

DEFAULT_GRID_N = 4001
MIN_INTERVAL = 10.0
MEMBERSHIP_SLACK = 1e-6


class SolverError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MaxIterExceeded(SolverError):
    pass


class MembershipDrift(SolverError):
    """An iterate left the admissible class; the grid is too coarse."""


class InvariantViolation(SolverError):
    pass


@dataclass(frozen=True)
class _Pullback:
    u: np.ndarray           # f^{-1}(x) at the nodes
    g_u: np.ndarray         # g(u)
    gp_u: np.ndarray        # g'(u)
    finv_prime: np.ndarray  # (f^{-1})'(x) = 1 / f'(u)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    h: Expr
    f: Expr
    g: Expr
    hp: Expr
    fp: Expr
    gp: Expr
    constants: Constants
    A: float | None = None
    grid_n: int = DEFAULT_GRID_N
    inverse_tol: float = DEFAULT_TOL
    probe_interval: float = 10.0
    h_map: MonotoneMap = field(init=False, repr=False)
    f_map: MonotoneMap = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.constants.check()
        if self.grid_n < 2:
            raise ValueError(f"grid_n must be at least 2, got {self.grid_n}")
        c = self.constants
        object.__setattr__(self, "h_map", MonotoneMap.from_exprs(
            self.h, self.hp, c.K, self.probe_interval))
        object.__setattr__(self, "f_map", MonotoneMap.from_exprs(
            self.f, self.fp, c.alpha, self.probe_interval))
        if self.A is None:
            object.__setattr__(self, "A", default_interval(self))
        if not (np.isfinite(self.A) and self.A > 0):
            raise ValueError(f"interval halfwidth must be positive, got {self.A}")

    def grid(self, sampler=0.0):
        """Grid function on this problem's default grid."""
        if callable(sampler):
            return make_grid(self.A, self.grid_n, sampler)
        return make_grid(self.A, self.grid_n, lambda x: np.full_like(x, sampler))

    def pullback(self, nodes) -> _Pullback:
        # f^{-1} at the nodes never changes between sweeps, so it is computed
        # once per node set
        key = (nodes.size, nodes.tobytes())
        pb = self._cache.get(key)
        if pb is None:
            u = invert(self.f_map, nodes, self.inverse_tol)
            pb = _Pullback(u, eval_expr(self.g, u), eval_expr(self.gp, u),
                           1.0 / eval_expr(self.fp, u))
            self._cache.clear()
            self._cache[key] = pb
        return pb


def build_problem(h, f, g, hp=None, fp=None, gp=None, constants=None,
                  A=None, grid_n=DEFAULT_GRID_N, inverse_tol=DEFAULT_TOL,
                  probe_interval=10.0, n_probe=4001):
    """Assemble a :class:`ProblemSpec` from expression strings (or trees).

    Missing derivatives are produced symbolically. Constants are estimated on
    a probe grid and overridden by any declared values in ``constants``
    (keys ``K``, ``alpha``, ``beta``, ``g_bound``).
    """
    def as_expr(e):
        return parse_expr(e) if isinstance(e, str) else e

    h, f, g = as_expr(h), as_expr(f), as_expr(g)
    hp = as_expr(hp) if hp is not None else differentiate(h)
    fp = as_expr(fp) if fp is not None else differentiate(f)
    gp = as_expr(gp) if gp is not None else differentiate(g)

    exprs = SimpleNamespace(hp=hp, fp=fp, g=g, gp=gp)
    estimated = estimate_constants(exprs, probe_interval, n_probe)
    merged = merge_constants(constants or {}, estimated)
    return ProblemSpec(h, f, g, hp, fp, gp, merged, A, grid_n, inverse_tol,
                       probe_interval)


def default_interval(p) -> float:
    """Halfwidth that keeps the solution's range well inside the grid.

    Iterates ``b <- max |h^{-1}(+-(b + sup|g|))|`` from ``b = 0``; the map has
    slope at most ``1/K < 1`` so this converges. Returns ``max(10, 2 b)``.
    """
    gb = p.constants.g_bound
    b = 0.0
    for _ in range(10_000):
        t = invert(p.h_map, np.array([b + gb, -(b + gb)]))
        b_new = float(np.max(np.abs(t)))
        if abs(b_new - b) < 1e-6:
            b = b_new
            break
        b = b_new
    return max(MIN_INTERVAL, 2.0 * b)


def _inner(phi, p):
    pb = p.pullback(phi.nodes)
    v = phi(phi(pb.u)) - pb.g_u
    return pb, v


def apply_lambda(phi: GridFunction, p: ProblemSpec) -> GridFunction:
    """``(Lam phi)(x) = h^{-1}(phi(phi(f^{-1} x)) - g(f^{-1} x))`` on phi's nodes."""
    _, v = _inner(phi, p)
    return phi.with_values(invert(p.h_map, v, p.inverse_tol))


def apply_psi(phi: GridFunction, Phi: GridFunction, p: ProblemSpec) -> GridFunction:
    """Derivative operator, evaluated on phi's nodes."""
    return _sweep(phi, Phi, p)[1]


def _sweep(phi, Phi, p):
    pb, v = _inner(phi, p)
    t = invert(p.h_map, v, p.inverse_tol)
    hinv_prime = 1.0 / eval_expr(p.hp, t)
    inner = Phi(phi(pb.u)) * Phi(pb.u) - pb.gp_u
    return phi.with_values(t), phi.with_values(hinv_prime * inner * pb.finv_prime)


@dataclass(frozen=True)
class StepRecord:
    n: int
    delta_phi: float
    delta_Phi: float
    residual: float
    seconds: float


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    stop_reason: str = "running"

    def __len__(self):
        return len(self.records)

    @property
    def deltas_phi(self):
        return [r.delta_phi for r in self.records]

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "delta_phi", "delta_Phi", "residual", "seconds"])
            for r in self.records:
                w.writerow([r.n, repr(r.delta_phi), repr(r.delta_Phi),
                            repr(r.residual), repr(r.seconds)])


@dataclass(frozen=True)
class SolutionPair:
    phi_star: GridFunction
    Phi_star: GridFunction
    report: ConditionReport
    trace: IterationTrace

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def error_bound(self):
        """A-posteriori sup-error bound for phi: delta * q / (1 - q)."""
        q = self.report.lambda_factor
        return self.trace.records[-1].delta_phi * q / (1 - q)


def zero_seed(p: ProblemSpec):
    """The seed ``phi0 = 0, Phi0 = 0``; ``Phi0`` is exactly ``phi0'``."""
    zero = p.grid(0.0)
    return zero, zero


def iterate_fiber(phi0: GridFunction, Phi0: GridFunction, p: ProblemSpec,
                  tol=1e-10, max_iter=200, report=None,
                  residual_tol=None) -> SolutionPair:
    """Iterate ``(phi, Phi) <- (Lam phi, Psi(phi, Phi))`` until both sup
    deltas drop to ``tol``.

    Parameters
    ----------
    phi0, Phi0 : GridFunction
        Seed. ``phi0`` must be ``L``-Lipschitz and ``Phi0`` bounded by
        ``rho``; pass ``Phi0 = phi0'`` for the limit to be the derivative.
    p : ProblemSpec
    tol : float
        Stop when ``max(|phi_{n+1} - phi_n|, |Phi_{n+1} - Phi_n|) <= tol``.
    max_iter : int
    report : ConditionReport, optional
        Supplies ``L`` and ``rho``; defaults to ``validate(p.constants)``.
    residual_tol : float, optional
        If given, a residual above it at convergence raises
        :class:`InvariantViolation`. Interpolation error alone is of order
        ``spacing^2``, so coarse grids need a looser value.

    Raises
    ------
    MaxIterExceeded, MembershipDrift, InvariantViolation
        Each carries the partial trace as ``.trace``.
    """
    from .verify import residual

    if report is None:
        report = validate(p.constants)
    L, rho = report.chosen_L, report.chosen_rho
    L_cap = L * (1 + MEMBERSHIP_SLACK)
    rho_cap = rho * (1 + MEMBERSHIP_SLACK)
    if lipschitz_estimate(phi0) > L_cap:
        raise ValueError(f"seed phi0 has Lipschitz constant "
                         f"{lipschitz_estimate(phi0):.6g} > L = {L:.6g}")
    if bound_estimate(Phi0) > rho_cap:
        raise ValueError(f"seed Phi0 has sup {bound_estimate(Phi0):.6g} > rho = {rho:.6g}")

    trace = IterationTrace()
    phi, Phi = phi0, Phi0
    start = time.perf_counter()
    for n in range(1, max_iter + 1):
        phi_new, Phi_new = _sweep(phi, Phi, p)
        d_phi = sup_dist(phi_new, phi)
        d_Phi = sup_dist(Phi_new, Phi)
        res, _ = residual(phi_new, p, p.grid_n)
        trace.records.append(StepRecord(n, d_phi, d_Phi, res,
                                        time.perf_counter() - start))
        log.debug("step %d: dphi=%.3e dPhi=%.3e residual=%.3e", n, d_phi, d_Phi, res)
        phi, Phi = phi_new, Phi_new
        lip, bound = lipschitz_estimate(phi), bound_estimate(Phi)
        if lip > L_cap or bound > rho_cap:
            trace.stop_reason = "membership_drift"
            raise MembershipDrift(
                f"step {n}: Lip(phi) = {lip:.6g} (L = {L:.6g}), "
                f"sup|Phi| = {bound:.6g} (rho = {rho:.6g})", trace)
        if max(d_phi, d_Phi) <= tol:
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "max_iter"
        raise MaxIterExceeded(
            f"no convergence to {tol:g} in {max_iter} iterations "
            f"(last deltas {d_phi:.3e}, {d_Phi:.3e})", trace)

    if lipschitz_estimate(phi) > L * (1 + 1e-9) or bound_estimate(Phi) > rho:
        raise InvariantViolation("converged pair lies outside the admissible class", trace)
    res = trace.records[-1].residual
    if residual_tol is not None and res > residual_tol:
        raise InvariantViolation(
            f"residual {res:.3e} exceeds {residual_tol:g} at convergence", trace)
    return SolutionPair(phi, Phi, report, trace)
