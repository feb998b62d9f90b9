"""Factor recovery scoring and Dolan-More performance profiles."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .kruskal import KruskalModel

RECOVERY_THRESHOLD = 0.97


def congruence(x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> float:
    """Product over modes of ``|<u, v>| / (||u|| ||v||)`` for two rank-one terms."""
    if len(x) != len(y):
        raise ValueError("rank-one terms must have the same order")
    score = 1.0
    for u, v in zip(x, y):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise ValueError("congruence is undefined for zero vectors")
        score *= abs(float(np.dot(u, v))) / (nu * nv)
    return min(score, 1.0)


@dataclass
class RecoveryReport:
    permutation: tuple  # permutation[r] = truth component matched to found component r
    scores: np.ndarray
    recovered: bool

    @property
    def min_congruence(self) -> float:
        return float(np.min(self.scores))


def _congruence_matrix(found: KruskalModel, truth: KruskalModel) -> np.ndarray:
    cos = np.ones((found.rank, truth.rank))
    for a, b in zip(found.factors, truth.factors):
        na = np.linalg.norm(a, axis=0)
        nb = np.linalg.norm(b, axis=0)
        if np.any(na == 0) or np.any(nb == 0):
            raise ValueError("congruence is undefined for zero columns")
        cos *= np.abs(a.T @ b) / np.outer(na, nb)
    return np.minimum(cos, 1.0)


def match_and_recover(found: KruskalModel, truth: KruskalModel, threshold: float = RECOVERY_THRESHOLD) -> RecoveryReport:
    """Best component matching by exhaustive search over permutations.

    Picks the permutation with the largest sum of congruences; among exact
    ties the lexicographically smallest wins. Weights are ignored since
    congruence is scale invariant.
    """
    if found.rank != truth.rank:
        raise ValueError(f"rank mismatch: {found.rank} vs {truth.rank}")
    if found.dims != truth.dims:
        raise ValueError(f"dims mismatch: {found.dims} vs {truth.dims}")
    if found.rank > 8:
        raise ValueError("exhaustive matching supports R <= 8")
    cong = _congruence_matrix(found, truth)
    rows = np.arange(found.rank)
    best, best_sum = None, -np.inf
    for perm in itertools.permutations(range(found.rank)):
        total = cong[rows, perm].sum()
        if total > best_sum:
            best, best_sum = perm, total
    scores = cong[rows, best]
    return RecoveryReport(tuple(best), scores, bool(np.all(scores > threshold)))


def default_tau_grid() -> np.ndarray:
    return np.geomspace(1.0, 100.0, 256)


@dataclass
class PerformanceProfile:
    solvers: list
    tau: np.ndarray
    rho: np.ndarray  # shape (n_solvers, n_tau)
    n_problems: int
    ratios: Optional[np.ndarray] = None  # shape (n_solvers, n_problems) when known

    def curve(self, solver: str) -> np.ndarray:
        return self.rho[self.solvers.index(solver)]

    def at(self, solver: str, tau: float) -> float:
        """Right-continuous step function value at ``tau``."""
        s = self.solvers.index(solver)
        if self.ratios is not None:
            return float(np.mean(self.ratios[s] <= tau))
        idx = np.searchsorted(self.tau, tau, side="right") - 1
        return float(self.rho[s, idx]) if idx >= 0 else 0.0


def performance_ratios(times: np.ndarray, converged: np.ndarray) -> np.ndarray:
    """Ratios ``t_ps / min_s t_ps``; unconverged runs get ``inf``."""
    times = np.asarray(times, dtype=np.float64)
    converged = np.asarray(converged, dtype=bool)
    if times.ndim != 2 or times.size == 0:
        raise ValueError("times must be a non-empty problems x solvers table")
    if converged.shape != times.shape:
        raise ValueError("converged flags must match the times table")
    t = np.where(converged, times, np.inf)
    best = t.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = t / best
    # a zero best time makes its own run ratio 1 and every slower run infinite
    ratios = np.where((best == 0) & (t == 0), 1.0, ratios)
    ratios = np.where(np.isfinite(best), ratios, np.inf)
    return np.where(np.isnan(ratios), np.inf, ratios)


def performance_profile(times, converged, solvers: Sequence[str], tau_grid=None) -> PerformanceProfile:
    """Fraction of problems each solver finishes within ``tau`` of the best time.

    ``times`` and ``converged`` are ``(n_problems, n_solvers)`` tables.
    """
    ratios = performance_ratios(times, converged)
    if ratios.shape[1] != len(solvers):
        raise ValueError("one solver name per column is required")
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=np.float64)
    rho = (ratios.T[:, :, None] <= tau[None, None, :]).mean(axis=1)
    return PerformanceProfile(list(solvers), tau, rho, ratios.shape[0], ratios.T)


def validate_profile(prof: PerformanceProfile) -> None:
    """Raise ValueError unless every curve is a nondecreasing CDF in ``[0, 1]``."""
    if np.any(np.diff(prof.tau) < 0):
        raise ValueError("tau grid must be nondecreasing")
    if np.any(prof.rho < 0) or np.any(prof.rho > 1):
        raise ValueError("rho values must lie in [0, 1]")
    if np.any(np.diff(prof.rho, axis=1) < 0):
        raise ValueError("rho must be nondecreasing in tau")


def write_profile_csv(prof: PerformanceProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "solver", "rho"])
        for s, name in enumerate(prof.solvers):
            for t, r in zip(prof.tau, prof.rho[s]):
                w.writerow([repr(float(t)), name, repr(float(r))])


def read_profile_csv(path) -> PerformanceProfile:
    curves: dict[str, list] = {}
    taus: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["solver"], []).append(float(row["rho"]))
            taus.setdefault(row["solver"], []).append(float(row["tau"]))
    names = list(curves)
    if not names:
        raise ValueError(f"no profile rows in {path}")
    tau = np.array(taus[names[0]])
    return PerformanceProfile(names, tau, np.array([curves[n] for n in names]), n_problems=0)
