"""Solvability conditions and the admissible windows for ``L`` and ``rho``.

Given derivative bounds ``|h'| >= K``, ``|f'| >= alpha``, ``|g'| <= beta`` and
``sup |g| < inf``, a C^1 solution with bounded derivative exists when

* ``beta < alpha^2 K^2 / 4``           if ``alpha <  2 (1 - 1/K)``  (small alpha),
* ``beta < (K - 1)(alpha K - K + 1)``  if ``alpha >= 2 (1 - 1/K)``  (large alpha).

The Lipschitz bound ``L`` of the candidate solution and the sup bound ``rho``
of its candidate derivative must then lie in

* ``L   in [c - r, c + r] ∩ (0, K - 1)``,
* ``rho in [c - r, c + r] ∩ (0, alpha K / 2)``,

with ``c = alpha K / 2`` and ``r = sqrt(alpha^2 K^2 - 4 beta) / 2``. These make
the solution operator a contraction with factor ``(L + 1)/K`` and the
derivative operator a uniform contraction with factor ``2 rho / (alpha K)``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .expr import DomainError, eval_expr

__all__ = [
    "Case", "Constants", "Interval", "ConditionReport",
    "ConditionError", "HypothesisViolation", "BetaTooLarge",
    "ExplicitOutOfWindow", "UnboundedFunction",
    "case_threshold", "beta_bound", "validate", "choose_parameters",
    "estimate_constants", "merge_constants",
]

log = logging.getLogger(__name__)

# relative shrink applied to open window ends
OPEN_END_SHRINK = 1e-9


class ConditionError(ValueError):
    pass


class HypothesisViolation(ConditionError):
    pass


class BetaTooLarge(ConditionError):
    def __init__(self, case, bound, beta):
        self.case = case
        self.bound = bound
        self.beta = beta
        super().__init__(
            f"beta = {beta:g} is not below the {case.value} bound {bound:.12g}"
        )


class ExplicitOutOfWindow(ConditionError):
    pass


class UnboundedFunction(HypothesisViolation):
    pass


class Case(enum.Enum):
    SMALL_ALPHA = "SmallAlpha"
    LARGE_ALPHA = "LargeAlpha"


@dataclass(frozen=True)
class Constants:
    K: float
    alpha: float
    beta: float
    g_bound: float
    # "declared" or "estimated", per constant
    provenance: dict = field(default_factory=dict, compare=False)

    def check(self):
        vals = dict(K=self.K, alpha=self.alpha, beta=self.beta, g_bound=self.g_bound)
        bad = [k for k, v in vals.items() if not math.isfinite(v)]
        if bad:
            raise HypothesisViolation(f"non-finite constants: {', '.join(bad)}")
        if self.K <= 1:
            raise HypothesisViolation(f"K must exceed 1, got K = {self.K:g}")
        if self.alpha <= 0:
            raise HypothesisViolation(f"alpha must be positive, got {self.alpha:g}")
        if self.beta <= 0:
            raise HypothesisViolation(f"beta must be positive, got {self.beta:g}")
        if self.g_bound < 0:
            raise HypothesisViolation(f"g_bound must be non-negative, got {self.g_bound:g}")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __contains__(self, v):
        above = v >= self.lo if self.lo_closed else v > self.lo
        below = v <= self.hi if self.hi_closed else v < self.hi
        return above and below

    @property
    def empty(self):
        if self.lo_closed and self.hi_closed:
            return not self.lo <= self.hi
        return not self.lo < self.hi

    def effective_hi(self):
        return self.hi if self.hi_closed else self.hi * (1 - OPEN_END_SHRINK)

    def effective_lo(self):
        return self.lo if self.lo_closed else self.lo * (1 + OPEN_END_SHRINK)

    def midpoint(self):
        return 0.5 * (self.effective_lo() + self.effective_hi())

    def to_json(self):
        return {"lo": self.lo, "hi": self.hi,
                "lo_closed": self.lo_closed, "hi_closed": self.hi_closed}


def _intersect_open_upper(lo, hi, upper):
    """``[lo, hi] ∩ (0, upper)``; ``lo`` is positive whenever beta is."""
    if upper <= hi:
        return Interval(lo, upper, lo > 0, False)
    return Interval(lo, hi, lo > 0, True)


@dataclass(frozen=True)
class ConditionReport:
    case: Case
    threshold: float          # 2 (1 - 1/K)
    beta_bound: float
    discriminant: float       # alpha^2 K^2 - 4 beta
    L_window: Interval
    rho_window: Interval
    chosen_L: float
    chosen_rho: float
    constants: Constants

    @property
    def lambda_factor(self):
        return (self.chosen_L + 1) / self.constants.K

    @property
    def psi_factor(self):
        return 2 * self.chosen_rho / (self.constants.alpha * self.constants.K)

    @property
    def factor(self):
        return max(self.lambda_factor, self.psi_factor)

    def to_json(self):
        c = self.constants
        return {
            "case": self.case.value,
            "threshold": self.threshold,
            "beta_bound": self.beta_bound,
            "discriminant": self.discriminant,
            "constants": {"K": c.K, "alpha": c.alpha, "beta": c.beta,
                          "g_bound": c.g_bound},
            "provenance": dict(c.provenance),
            "L_window": self.L_window.to_json(),
            "rho_window": self.rho_window.to_json(),
            "chosen_L": self.chosen_L,
            "chosen_rho": self.chosen_rho,
            "lambda_factor": self.lambda_factor,
            "psi_factor": self.psi_factor,
        }


def case_threshold(K):
    return 2 * (1 - 1 / K)


def beta_bound(K, alpha):
    """Case and the strict upper bound on beta for these ``K`` and ``alpha``."""
    if alpha < case_threshold(K):
        return Case.SMALL_ALPHA, 0.25 * alpha**2 * K**2
    return Case.LARGE_ALPHA, (K - 1) * (alpha * K - K + 1)


def validate(c: Constants, policy="midpoint", L=None, rho=None) -> ConditionReport:
    """Check the hypotheses, build both windows and pick ``(L, rho)``.

    Raises :class:`HypothesisViolation` or :class:`BetaTooLarge`; see
    :func:`choose_parameters` for ``policy``.
    """
    c.check()
    case, bound = beta_bound(c.K, c.alpha)
    if not c.beta < bound:
        raise BetaTooLarge(case, bound, c.beta)
    aK = c.alpha * c.K
    disc = aK**2 - 4 * c.beta
    if not disc > 0:
        # implied by the beta bound in both cases
        raise AssertionError(f"non-positive discriminant {disc} after a passing beta check")
    r = 0.5 * math.sqrt(disc)
    hi = 0.5 * aK + r
    lo = c.beta / hi  # roots multiply to beta; avoids cancellation when beta << (aK)^2
    L_window = _intersect_open_upper(lo, hi, c.K - 1)
    rho_window = _intersect_open_upper(lo, hi, 0.5 * aK)
    if L_window.empty or rho_window.empty:
        raise AssertionError(
            f"empty admissible window (L {L_window}, rho {rho_window}) "
            "although the beta bound holds"
        )
    report = ConditionReport(case, case_threshold(c.K), bound, disc,
                             L_window, rho_window, math.nan, math.nan, c)
    L, rho = choose_parameters(report, policy, L, rho)
    return replace(report, chosen_L=L, chosen_rho=rho)


def choose_parameters(r: ConditionReport, policy="midpoint", L=None, rho=None):
    """Pick ``(L, rho)`` inside the windows of ``r``.

    ``policy`` is ``"midpoint"`` (window midpoints, open ends pulled in by
    1e-9 relative), ``"min"`` (lower endpoints) or ``"explicit"`` (use the
    given ``L`` and ``rho``, which must lie in the windows).
    """
    if policy == "midpoint":
        return r.L_window.midpoint(), r.rho_window.midpoint()
    if policy == "min":
        return r.L_window.effective_lo(), r.rho_window.effective_lo()
    if policy == "explicit":
        if L is None or rho is None:
            raise ValueError("explicit policy needs both L and rho")
        if L not in r.L_window:
            raise ExplicitOutOfWindow(f"L = {L:g} outside {r.L_window}")
        if rho not in r.rho_window:
            raise ExplicitOutOfWindow(f"rho = {rho:g} outside {r.rho_window}")
        return float(L), float(rho)
    raise ValueError(f"unknown policy {policy!r}")


def _probe_max(expr, halfwidth, n):
    xs = np.linspace(-halfwidth, halfwidth, n)
    return float(np.max(np.abs(eval_expr(expr, xs))))


def estimate_constants(p, probe_interval=10.0, n_probe=4001) -> Constants:
    """Grid estimates of ``K``, ``alpha``, ``beta`` and ``sup |g|``.

    ``p`` needs ``hp``, ``fp``, ``g`` and ``gp`` expression attributes. The
    values are extrema over ``n_probe`` uniform points on
    ``[-probe_interval, probe_interval]`` and are labelled ``estimated``:
    they are not proofs about the whole real line.

    ``g`` is also probed on a window four times wider; growth of its sup by
    more than half is taken as unboundedness and raises
    :class:`UnboundedFunction`.
    """
    xs = np.linspace(-probe_interval, probe_interval, n_probe)
    K = float(np.min(np.abs(eval_expr(p.hp, xs))))
    alpha = float(np.min(np.abs(eval_expr(p.fp, xs))))
    beta = float(np.max(np.abs(eval_expr(p.gp, xs))))
    g_bound = _probe_max(p.g, probe_interval, n_probe)
    try:
        g_wide = _probe_max(p.g, 4 * probe_interval, 4 * n_probe)
    except DomainError as exc:
        raise UnboundedFunction(f"g overflows on the wide probe window: {exc}") from exc
    if g_wide > 1.5 * g_bound + 1e-12:
        raise UnboundedFunction(
            f"sup|g| grows from {g_bound:.6g} to {g_wide:.6g} when the probe "
            "window is widened; g appears unbounded"
        )
    return Constants(K, alpha, beta, g_bound,
                     {k: "estimated" for k in ("K", "alpha", "beta", "g_bound")})


def merge_constants(declared: dict, estimated: Constants) -> Constants:
    """Declared values win; disagreements beyond 1e-6 relative are logged."""
    vals = asdict(estimated)
    vals.pop("provenance")
    prov = dict(estimated.provenance)
    for k, v in declared.items():
        if v is None:
            continue
        est = vals[k]
        if abs(v - est) > 1e-6 * max(abs(v), abs(est)):
            log.warning("declared %s = %g differs from the estimate %g; using %g",
                        k, v, est, v)
        vals[k] = float(v)
        prov[k] = "declared"
    return Constants(**vals, provenance=prov)
