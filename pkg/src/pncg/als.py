"""Alternating least squares (block nonlinear Gauss-Seidel) for CP."""
from __future__ import annotations

import time

import numpy as np

from .kruskal import KruskalModel, even_scaling, factor_views
from .objective import ObjectiveWorkspace, gamma
from .runs import SolverRun, Status, StopRule, TraceRow


def pinv_spd(m: np.ndarray) -> np.ndarray:
    """Pseudoinverse of a small symmetric PSD matrix via its eigendecomposition.

    Eigenvalues below ``R * eps * lambda_max`` are treated as zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("pinv_spd needs a square matrix")
    if m.size == 0:
        return m.copy()
    if np.abs(m - m.T).max() > 1e-12 * np.abs(m).max():
        raise ValueError("pinv_spd needs a symmetric matrix")
    vals, vecs = np.linalg.eigh(m)  # ascending; reads one triangle only
    cutoff = m.shape[0] * np.finfo(np.float64).eps * vals[-1]
    keep = vals > cutoff
    if keep.all():
        return (vecs / vals) @ vecs.T
    if not keep.any():
        return np.zeros_like(m)
    v = vecs[:, keep]
    return (v / vals[keep]) @ v.T


def sweep_factors(factors: list[np.ndarray], ws: ObjectiveWorkspace) -> list[np.ndarray]:
    """One Gauss-Seidel pass over the modes in ascending order; returns new arrays."""
    factors = list(factors)
    grams = [a.T @ a for a in factors]
    for n in range(len(factors)):
        a = ws.mttkrp(factors, n) @ pinv_spd(gamma(grams, n))
        factors[n] = a
        grams[n] = a.T @ a
    return factors


def als_sweep(m: KruskalModel, ws: ObjectiveWorkspace) -> KruskalModel:
    """Exactly minimize over each factor in turn, without normalization."""
    if m.dims != tuple(ws.dims) or m.rank != ws.rank:
        raise ValueError("model shape does not match the workspace")
    factors = list(m.factors)
    if not np.all(m.weights == 1.0):
        factors[0] = factors[0] * m.weights
    return KruskalModel(tuple(sweep_factors(factors, ws)))


def als_solve(m0: KruskalModel, ws: ObjectiveWorkspace, stop: StopRule = StopRule()) -> SolverRun:
    """Run ALS sweeps with even normalization until the stop rule fires.

    The gradient is evaluated after every sweep purely for the stopping test.
    That time is reported as ``grad_time_s`` and excluded from ``time_s``.
    """
    if m0.dims != tuple(ws.dims) or m0.rank != ws.rank:
        raise ValueError("model shape does not match the workspace")
    ws.reset_counters()
    factors = list(m0.factors)
    if not np.all(m0.weights == 1.0):
        factors[0] = factors[0] * m0.weights
    start = time.perf_counter()
    grad_time = 0.0

    def check(iteration):
        nonlocal grad_time
        t = time.perf_counter()
        x = np.concatenate([a.ravel(order="F") for a in factors])
        f, g = ws.fg(x)
        gnorm = float(np.linalg.norm(g)) / ws.n_vars
        grad_time += time.perf_counter() - t
        elapsed = time.perf_counter() - start - grad_time
        trace.append(TraceRow(iteration, f, gnorm, ws.f_evals, elapsed))
        return x, gnorm

    trace: list[TraceRow] = []
    x, gnorm = check(0)
    status = Status.CONVERGED if gnorm <= stop.gtol else None
    iteration = 0
    while status is None:
        if iteration >= stop.max_iterations:
            status = Status.ITER_LIMIT
            break
        if ws.f_evals >= stop.max_fevals:
            status = Status.FEVAL_LIMIT
            break
        iteration += 1
        factors = sweep_factors(factors, ws)
        factors, _ = even_scaling(factors, np.ones(ws.rank))
        x, gnorm = check(iteration)
        if gnorm <= stop.gtol:
            status = Status.CONVERGED
    total = time.perf_counter() - start
    model = KruskalModel(tuple(factor_views(x, ws.dims, ws.rank)))
    return SolverRun(
        status=status,
        x=x,
        iterations=iteration,
        fevals=ws.f_evals,
        gevals=ws.g_evals,
        time_s=total - grad_time,
        grad_time_s=grad_time,
        trace=trace,
        model=model,
    )
