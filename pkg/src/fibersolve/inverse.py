"""Inverses of strictly monotone maps whose derivative is bounded away from 0.

If ``|m'(x)| >= floor > 0`` everywhere, ``m`` is a bijection of the real
line and ``m^{-1}`` is Lipschitz with constant ``1/floor``. :func:`invert`
finds ``m^{-1}(y)`` with a geometrically expanded bracket followed by a
Newton iteration that falls back to bisection whenever a step leaves the
bracket or fails to shrink the residual. Everything is vectorised over
numpy arrays of targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import DomainError, Expr, eval_expr

__all__ = [
    "MonotoneMap", "InversionError", "MonotonicityError",
    "invert", "inverse_derivative", "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-12
MAX_DOUBLINGS = 200
MAX_NEWTON = 200


class InversionError(ArithmeticError):
    pass


class MonotonicityError(ValueError):
    """The derivative does not respect the declared floor on the probe grid."""


@dataclass(frozen=True)
class MonotoneMap:
    forward: Expr
    derivative: Expr
    direction: int
    derivative_floor: float

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if not self.derivative_floor > 0:
            raise ValueError("derivative_floor must be positive")

    @classmethod
    def from_exprs(cls, forward, derivative, floor, probe_halfwidth=10.0,
                   n_probe=2001):
        """Build a map, checking ``|derivative| >= floor`` on a dense probe grid.

        The direction is read from the sign of the derivative at 0.
        """
        floor = float(floor)
        if not floor > 0:
            raise MonotonicityError(f"derivative floor must be positive, got {floor}")
        xs = np.linspace(-probe_halfwidth, probe_halfwidth, n_probe)
        d = eval_expr(derivative, xs)
        d0 = eval_expr(derivative, 0.0)
        if d0 == 0:
            raise MonotonicityError("derivative vanishes at 0")
        direction = 1 if d0 > 0 else -1
        # tiny relative slack: a floor attained exactly (cos(pi) + 4 = 3)
        # must not be rejected for rounding in the last bit
        bad = np.abs(d) < floor * (1 - 1e-12)
        if np.any(bad):
            x_bad = xs[np.argmax(bad)]
            raise MonotonicityError(
                f"|{derivative}| = {abs(eval_expr(derivative, x_bad)):.6g} < {floor:g} "
                f"at x = {x_bad:.6g}"
            )
        if np.any(np.sign(d) != direction):
            raise MonotonicityError(f"{derivative} changes sign on the probe grid")
        return cls(forward, derivative, direction, floor)

    def __call__(self, x):
        return eval_expr(self.forward, x)

    def slope(self, x):
        return eval_expr(self.derivative, x)


def _forward(m, x):
    try:
        return eval_expr(m.forward, x)
    except DomainError as exc:
        raise InversionError(f"non-finite forward value: {exc}") from exc


def _bracket(m, y, x0, s0):
    """Expand geometrically from ``x0`` until ``[lo, hi]`` straddles ``y``.

    ``s`` is the residual oriented so that it increases with ``x``.
    """
    lo = x0.copy()
    hi = x0.copy()
    s_lo = s0.copy()
    s_hi = s0.copy()
    # the side that still needs a probe: +1 means search to the right
    side = np.where(s0 > 0, -1.0, 1.0)
    open_ = s0 != 0
    width = np.ones_like(x0)
    for _ in range(MAX_DOUBLINGS):
        if not open_.any():
            return lo, hi, s_lo, s_hi
        idx = np.flatnonzero(open_)
        probe = x0[idx] + side[idx] * width[idx]
        s = m.direction * (_forward(m, probe) - y[idx])
        right = side[idx] > 0
        # probes that overshoot close the bracket; the others tighten it
        new_hi = right & (s >= 0)
        tighten_lo = right & (s < 0)
        new_lo = ~right & (s <= 0)
        tighten_hi = ~right & (s > 0)
        for mask, arr, sarr in ((new_hi | tighten_hi, hi, s_hi),
                                (new_lo | tighten_lo, lo, s_lo)):
            arr[idx[mask]] = probe[mask]
            sarr[idx[mask]] = s[mask]
        open_[idx[new_hi | new_lo]] = False
        width[idx] *= 2.0
    raise InversionError(
        f"bracket expansion failed after {MAX_DOUBLINGS} doublings; "
        "the forward map probably violates its derivative floor"
    )


def invert(m: MonotoneMap, y, tol: float = DEFAULT_TOL):
    """Return ``x`` with ``|m(x) - y| <= tol`` (scalar or elementwise).

    When ``tol`` is below what floating point can resolve near the root the
    iteration stops once the bracket has no representable interior, and the
    best endpoint is returned.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float)).copy()
    if not np.all(np.isfinite(y)):
        raise InversionError("non-finite target value")

    x0 = m.direction * y / m.derivative_floor
    s0 = m.direction * (_forward(m, x0) - y)
    lo, hi, s_lo, s_hi = _bracket(m, y, x0, s0)

    # start from the better end of the bracket
    use_lo = np.abs(s_lo) <= np.abs(s_hi)
    x = np.where(use_lo, lo, hi)
    s = np.where(use_lo, s_lo, s_hi)
    active = np.abs(s) > tol

    for _ in range(MAX_NEWTON):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xi, si, loi, hii = x[idx], s[idx], lo[idx], hi[idx]
        d = m.direction * eval_expr(m.derivative, xi)
        with np.errstate(all="ignore"):
            cand = xi - si / d
        ok = np.isfinite(cand) & (cand > loi) & (cand < hii)
        cand = np.where(ok, cand, 0.5 * (loi + hii))
        s_cand = m.direction * (_forward(m, cand) - y[idx])
        # Newton steps must also reduce the residual, otherwise bisect
        retry = ok & (np.abs(s_cand) >= np.abs(si))
        if retry.any():
            mid = 0.5 * (loi[retry] + hii[retry])
            cand[retry] = mid
            s_cand[retry] = m.direction * (_forward(m, mid) - y[idx][retry])
        below = s_cand <= 0
        lo[idx] = np.where(below, cand, loi)
        hi[idx] = np.where(below, hii, cand)
        x[idx] = cand
        s[idx] = s_cand
        # bracket exhausted: no float strictly between lo and hi
        stuck = np.nextafter(lo[idx], np.inf) >= hi[idx]
        active[idx] = (np.abs(s_cand) > tol) & ~stuck
    else:
        raise InversionError(f"no convergence after {MAX_NEWTON} safeguarded steps")

    # the stopping point may be worse than a bracket end when stuck
    s_lo = m.direction * (_forward(m, lo) - y)
    s_hi = m.direction * (_forward(m, hi) - y)
    cands = np.stack([x, lo, hi])
    res = np.abs(np.stack([s, s_lo, s_hi]))
    x = cands[np.argmin(res, axis=0), np.arange(x.size)]
    return float(x[0]) if scalar else x


def inverse_derivative(m: MonotoneMap, y, tol: float = DEFAULT_TOL):
    """``(m^{-1})'(y) = 1 / m'(m^{-1}(y))``."""
    return 1.0 / eval_expr(m.derivative, invert(m, y, tol))
