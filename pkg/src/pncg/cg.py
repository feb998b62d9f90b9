"""Nonlinear CG (NCG) and ALS-preconditioned nonlinear CG (PNCG).

Both solvers work on flat float64 vectors through an ``fg(x) -> (f, g)``
callable, so the same code drives the CP problem and the quadratic oracles.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .als import sweep_factors
from .kruskal import FlatPoint, KruskalModel, even_scaling, factor_views, flatten
from .linesearch import LineSearchParams, LineSearchStatus, ray, strong_wolfe_search
from .objective import ObjectiveWorkspace
from .runs import SolverRun, Status, StopRule, TraceRow

log = logging.getLogger(__name__)

_TINY = 1e-300


class Family(str, enum.Enum):
    FR = "FR"
    PR = "PR"
    HS = "HS"


class Flavor(str, enum.Enum):
    PLAIN = "plain"
    TILDE = "tilde"
    HAT = "hat"


@dataclass(frozen=True)
class BetaVariant:
    family: Family
    flavor: Flavor

    @classmethod
    def parse(cls, family: str, flavor: str = "plain") -> "BetaVariant":
        return cls(Family(family.upper()), Flavor(flavor.lower()))

    def __str__(self):
        return f"{self.flavor.value}-{self.family.value}"


class ZeroDenominator(ArithmeticError):
    """The beta denominator vanished; the caller restarts with beta = 0."""


def compute_beta(variant: BetaVariant, g_new, g, gbar_new=None, gbar=None, p=None) -> float:
    """Conjugacy parameter for every NCG/PNCG variant.

    ``plain`` uses gradients only; ``tilde`` substitutes the preconditioned
    direction for every gradient; ``hat`` substitutes it for the
    preconditioned gradient, keeping one true-gradient factor.
    """
    fam, flav = variant.family, variant.flavor
    if flav is Flavor.PLAIN:
        gbar_new, gbar = g_new, g
    if flav is Flavor.TILDE:
        num_vec, den_a, den_b = gbar_new, gbar, gbar
        g_new, g = gbar_new, gbar
    else:
        num_vec, den_a, den_b = g_new, g, gbar
    if fam is Family.FR:
        num = np.dot(num_vec, gbar_new)
        den = np.dot(den_a, den_b)
    elif fam is Family.PR:
        num = np.dot(num_vec, gbar_new - gbar)
        den = np.dot(den_a, den_b)
    else:
        num = np.dot(num_vec, gbar_new - gbar)
        den = np.dot(g_new - g, p)
    if abs(den) < _TINY:
        raise ZeroDenominator(f"{variant} denominator {den!r}")
    return float(num / den)


def _run(
    fg: Callable,
    x0: np.ndarray,
    variant: BetaVariant,
    precond: Optional[Callable],
    ls: LineSearchParams,
    stop: StopRule,
    restart_period: int,
    exact_step: Optional[Callable],
    f_noise: Optional[Callable[[], float]] = None,
) -> SolverRun:
    start = time.perf_counter()
    x = np.array(x0, dtype=np.float64, copy=True)
    n_vars = x.size
    fevals = 1
    precond_calls = 0
    f, g = fg(x)

    def precondition(point, grad):
        nonlocal precond_calls
        if precond is None:
            return grad
        precond_calls += 1
        return point - precond(point)

    gbar = precondition(x, g)
    p = -gbar
    gnorm = float(np.linalg.norm(g)) / n_vars
    trace = [TraceRow(0, f, gnorm, fevals, time.perf_counter() - start)]
    status = Status.CONVERGED if gnorm <= stop.gtol else None
    k = 0
    restart_next = False
    while status is None:
        if k >= stop.max_iterations:
            status = Status.ITER_LIMIT
            break
        if fevals >= stop.max_fevals:
            status = Status.FEVAL_LIMIT
            break
        row = trace[-1]
        label = "cg"
        if restart_next:
            label = "restart"
        if restart_period > 0 and k > 0 and k % restart_period == 0:
            p, label = -g, "steepest"
        slope = float(np.dot(g, p))
        if slope >= 0:
            log.debug("iteration %d: direction not descent, restarting", k)
            p, label = -gbar, "restart"
            slope = float(np.dot(g, p))
            if slope >= 0:
                p, label = -g, "steepest"
                slope = float(np.dot(g, p))

        step = None
        while step is None:
            if exact_step is not None:
                alpha = exact_step(x, p)
                f_new, g_new = fg(x + alpha * p)
                fevals += 1
                step = (alpha, f_new, g_new, "exact")
                break
            if slope >= 0:
                break
            phi = ray(fg, x, p)
            params = ls if f_noise is None else replace(ls, f_noise=max(ls.f_noise, f_noise()))
            res = strong_wolfe_search(phi, f, slope, params)
            fevals += res.evals
            if res.status is not LineSearchStatus.NO_DECREASE:
                f_new, g_new = phi.cache[res.alpha]
                step = (res.alpha, f_new, g_new, res.status.value)
                break
            # safeguard ladder: preconditioned restart, then steepest descent, then give up;
            # a rung equal to the direction that just failed is skipped
            rungs = []
            if label == "cg" and precond is not None:
                rungs.append((-gbar, "restart"))
            if label != "steepest":
                rungs.append((-g, "steepest"))
            rungs = [r for r in rungs if not np.array_equal(r[0], p)]
            if not rungs:
                break
            p, label = rungs[0]
            slope = float(np.dot(g, p))
        if step is None:
            status = Status.LINE_SEARCH_FAIL
            break

        alpha, f_new, g_new, ls_status = step
        row.alpha, row.slope, row.ls_status, row.direction = alpha, slope, ls_status, label
        row.slope_next = float(np.dot(g_new, p))
        if precond is not None:
            row.gbar_dot = float(np.dot(g, gbar))
            row.ratio = slope / row.gbar_dot if row.gbar_dot != 0 else np.nan

        x = x + alpha * p
        k += 1
        gbar_new = precondition(x, g_new)
        gnorm = float(np.linalg.norm(g_new)) / n_vars
        trace.append(TraceRow(k, f_new, gnorm, fevals, time.perf_counter() - start))
        if gnorm <= stop.gtol:
            status = Status.CONVERGED
            f, g, gbar = f_new, g_new, gbar_new
            break

        # after a periodic steepest-descent step the next direction restarts from -gbar
        restart_next = label == "steepest" and restart_period > 0
        beta = 0.0
        if not restart_next:
            try:
                beta = compute_beta(variant, g_new, g, gbar_new, gbar, p)
            except ZeroDenominator:
                log.debug("iteration %d: zero beta denominator, restarting", k)
                restart_next = True
        trace[-1].beta = beta
        p = -gbar_new + beta * p
        f, g, gbar = f_new, g_new, gbar_new

    return SolverRun(
        status=status,
        x=x,
        iterations=k,
        fevals=fevals,
        gevals=fevals,
        time_s=time.perf_counter() - start,
        trace=trace,
        precond_calls=precond_calls,
        c1=ls.c1,
        c2=ls.c2,
    )


def ncg_solve(
    fg: Callable,
    x0: np.ndarray,
    variant: BetaVariant,
    ls: LineSearchParams = LineSearchParams(),
    stop: StopRule = StopRule(),
    restart_period: int = 0,
    exact_step: Optional[Callable] = None,
    f_noise: Optional[Callable[[], float]] = None,
) -> SolverRun:
    """Nonlinear conjugate gradients with a plain FR/PR/HS update.

    ``exact_step(x, p) -> alpha`` replaces the Wolfe search; it exists for
    the quadratic equivalence checks. ``f_noise()``, when given, is queried
    before every search for the current rounding floor of ``f`` (see
    ``LineSearchParams.f_noise``).
    """
    if variant.flavor is not Flavor.PLAIN:
        raise ValueError(f"NCG needs a plain beta variant, got {variant}")
    return _run(fg, x0, variant, None, ls, stop, restart_period, exact_step, f_noise)


def pncg_solve(
    fg: Callable,
    precond: Callable,
    x0: np.ndarray,
    variant: BetaVariant,
    ls: LineSearchParams = LineSearchParams(),
    stop: StopRule = StopRule(),
    restart_period: int = 0,
    exact_step: Optional[Callable] = None,
    f_noise: Optional[Callable[[], float]] = None,
) -> SolverRun:
    """Nonlinearly preconditioned NCG.

    ``precond(x)`` returns the preconditioned iterate ``P(x)``; the search
    uses ``gbar = x - P(x)`` in place of the gradient. With
    ``restart_period = m > 0`` every m-th step is a steepest-descent step
    and the following direction restarts from ``-gbar``.
    """
    if variant.flavor is Flavor.PLAIN:
        raise ValueError("PNCG needs a tilde or hat beta variant")
    return _run(fg, x0, variant, precond, ls, stop, restart_period, exact_step, f_noise)


def make_als_preconditioner(ws: ObjectiveWorkspace, normalize: bool = False) -> Callable:
    """``x -> flatten(als_sweep(unflatten(x)))`` over raw vectors."""

    def apply(x):
        factors = sweep_factors(factor_views(x, ws.dims, ws.rank), ws)
        if normalize:
            factors, _ = even_scaling(factors, np.ones(ws.rank))
        return np.concatenate([a.ravel(order="F") for a in factors])

    return apply


def als_preconditioner(x: FlatPoint, ws: ObjectiveWorkspace, normalize: bool = False) -> FlatPoint:
    return FlatPoint(make_als_preconditioner(ws, normalize)(x.values), x.dims, x.rank)


def _attach_model(run: SolverRun, ws: ObjectiveWorkspace) -> SolverRun:
    run.model = KruskalModel(tuple(factor_views(run.x, ws.dims, ws.rank)))
    return run


def cp_ncg(m0: KruskalModel, ws: ObjectiveWorkspace, family: str, ls=LineSearchParams(),
           stop=StopRule(), restart_period=0) -> SolverRun:
    ws.reset_counters()
    run = ncg_solve(ws.fg, flatten(m0).values, BetaVariant.parse(family), ls, stop, restart_period,
                    f_noise=lambda: ws.f_noise)
    return _attach_model(run, ws)


def cp_pncg(m0: KruskalModel, ws: ObjectiveWorkspace, variant: BetaVariant, ls=LineSearchParams(),
            stop=StopRule(), restart_period=0, normalize_precond=False) -> SolverRun:
    ws.reset_counters()
    precond = make_als_preconditioner(ws, normalize_precond)
    run = pncg_solve(ws.fg, precond, flatten(m0).values, variant, ls, stop, restart_period,
                     f_noise=lambda: ws.f_noise)
    return _attach_model(run, ws)
