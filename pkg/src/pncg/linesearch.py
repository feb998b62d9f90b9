"""Strong Wolfe line search: bracketing phase followed by a safeguarded zoom."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class LineSearchStatus(str, enum.Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NO_DECREASE = "no_decrease"


class NotDescentError(ValueError):
    """The search ray is not a descent direction (``phi'(0) >= 0``)."""


@dataclass(frozen=True)
class LineSearchParams:
    c1: float = 1e-4
    c2: float = 1e-2
    alpha0: float = 1.0
    max_iters: int = 20
    # absolute slack on every decrease comparison; covers rounding in phi itself
    f_noise: float = 0.0

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.f_noise >= 0 and math.isfinite(self.f_noise)):
            raise ValueError("f_noise must be finite and nonnegative")


@dataclass
class LineSearchResult:
    alpha: float
    status: LineSearchStatus
    evals: int
    phi: float
    dphi: float


# interpolated trial points must keep this fraction of the bracket on each side
_SAFEGUARD = 0.1
_EXPANSION = 2.0
# extrapolated steps stay within these multiples of the previous trial
_MIN_GROWTH = 1.1
_MAX_GROWTH = 4.0


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic matching values and slopes at ``a`` and ``b``, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if math.isfinite(t) else None


def strong_wolfe_search(
    phi: Callable[[float], tuple[float, float]],
    phi0: float,
    dphi0: float,
    params: LineSearchParams = LineSearchParams(),
) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions.

    Parameters
    ----------
    phi : callable
        ``phi(alpha) -> (value, derivative)`` along the search ray.
    phi0, dphi0 : float
        Value and derivative at ``alpha = 0``.
    params : LineSearchParams

    Returns
    -------
    LineSearchResult
        On ``SUCCESS`` the step satisfies sufficient decrease and the strong
        curvature condition. When the evaluation budget runs out, the best
        trial with a decrease is returned as ``BUDGET_EXHAUSTED``, or
        ``NO_DECREASE`` if no trial improved on ``phi0``.

    Notes
    -----
    With ``params.f_noise > 0`` every value comparison tolerates that much
    absolute error. Near a minimizer the true decrease can fall below the
    rounding error of ``phi``; the curvature test uses derivatives, which
    stay accurate there, so it still steers the search.
    """
    if not dphi0 < 0:
        raise NotDescentError(f"phi'(0) = {dphi0} is not negative")
    c1, c2, tol = params.c1, params.c2, params.f_noise
    evals = 0
    best = [0.0, phi0, dphi0]

    def trial(alpha):
        nonlocal evals
        evals += 1
        val, der = phi(alpha)
        if math.isfinite(val) and val < best[1]:
            best[:] = [alpha, val, der]
        return val, der

    def armijo_ok(alpha, val):
        return val <= phi0 + c1 * alpha * dphi0 + tol

    def curvature_ok(der):
        return abs(der) <= -c2 * dphi0

    def finish():
        if best[0] > 0:
            return LineSearchResult(best[0], LineSearchStatus.BUDGET_EXHAUSTED, evals, best[1], best[2])
        return LineSearchResult(0.0, LineSearchStatus.NO_DECREASE, evals, phi0, dphi0)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < params.max_iters:
            left, right = min(lo, hi), max(lo, hi)
            width = right - left
            alpha = None
            if math.isfinite(f_hi) and math.isfinite(d_hi):
                alpha = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            if alpha is None or not (left + _SAFEGUARD * width <= alpha <= right - _SAFEGUARD * width):
                alpha = 0.5 * (lo + hi)
            if alpha == lo or alpha == hi:
                break
            val, der = trial(alpha)
            if not math.isfinite(val) or not armijo_ok(alpha, val) or val >= f_lo + tol:
                hi, f_hi, d_hi = alpha, val, der
            else:
                if curvature_ok(der):
                    return LineSearchResult(alpha, LineSearchStatus.SUCCESS, evals, val, der)
                if der * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = alpha, val, der
        return finish()

    prev, f_prev, d_prev = 0.0, phi0, dphi0
    alpha = params.alpha0
    while evals < params.max_iters:
        val, der = trial(alpha)
        if not math.isfinite(val) or not armijo_ok(alpha, val) or (evals > 1 and val >= f_prev + tol):
            return zoom(prev, f_prev, d_prev, alpha, val, der)
        if curvature_ok(der):
            return LineSearchResult(alpha, LineSearchStatus.SUCCESS, evals, val, der)
        if der >= 0:
            return zoom(alpha, val, der, prev, f_prev, d_prev)
        # extrapolate to the minimizer of the cubic through the last two trials; once
        # their values agree to within rounding, the slopes alone give a secant step
        if abs(val - f_prev) <= tol and der > d_prev:
            nxt = prev - d_prev * (alpha - prev) / (der - d_prev)
        else:
            nxt = _cubic_min(prev, f_prev, d_prev, alpha, val, der)
        if nxt is None or not nxt > alpha:
            nxt = _EXPANSION * alpha
        prev, f_prev, d_prev = alpha, val, der
        alpha = min(max(nxt, _MIN_GROWTH * alpha), _MAX_GROWTH * alpha)
    return finish()


def wolfe_conditions_hold(phi0, dphi0, alpha, phi_alpha, dphi_alpha, c1, c2, f_noise=0.0) -> bool:
    """Independent re-check of both strong Wolfe inequalities."""
    return bool(
        phi_alpha <= phi0 + c1 * alpha * dphi0 + f_noise and abs(dphi_alpha) <= c2 * abs(dphi0)
    )


def ray(fg: Callable[[np.ndarray], tuple[float, np.ndarray]], x: np.ndarray, p: np.ndarray):
    """Wrap ``fg`` as ``phi(alpha) -> (value, derivative)`` along ``x + alpha p``.

    The returned closure remembers the gradient of every trial in ``cache``
    so the caller can reuse it at the accepted step.
    """
    cache = {}

    def phi(alpha):
        val, grad = fg(x + alpha * p)
        cache[alpha] = (val, grad)
        return val, float(np.dot(grad, p))

    phi.cache = cache
    return phi
