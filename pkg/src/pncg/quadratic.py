"""SPD quadratic problems, linear (P)CG and symmetric Gauss-Seidel.

These are correctness oracles for the nonlinear solvers, so everything is
dense and small.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

_SPD_PROBE_SEED = 20140101


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``phi(x) = 1/2 x^T A x - b^T x`` with ``A`` symmetric positive definite."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("A must be n x n and b of length n")
        if np.max(np.abs(A - A.T)) > 1e-12 * np.max(np.abs(A)):
            raise ValueError("A must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("A must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.size

    def value(self, x) -> float:
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def gradient(self, x) -> np.ndarray:
        return self.A @ x - self.b

    def fg(self, x):
        return self.value(x), self.gradient(x)

    def solution(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


def random_spd(n: int, rng: np.random.Generator, cond: float = 50.0) -> QuadraticProblem:
    """Random SPD problem with eigenvalues log-spaced on ``[1, cond]``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = (q * np.geomspace(1.0, cond, n)) @ q.T
    A = 0.5 * (A + A.T)
    return QuadraticProblem(A, rng.standard_normal(n))


def check_spd_operator(apply_p: Callable, n: int, trials: int = 5, tol: float = 1e-12) -> None:
    """Randomized symmetry and positivity probe; raises ValueError on failure."""
    rng = np.random.default_rng(_SPD_PROBE_SEED)
    for _ in range(trials):
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        pu, pv = apply_p(u), apply_p(v)
        lhs, rhs = float(u @ pv), float(pu @ v)
        if abs(lhs - rhs) > tol * max(1.0, abs(lhs), abs(rhs)):
            raise ValueError(f"operator is not symmetric: {lhs} vs {rhs}")
        if float(v @ pv) <= 0:
            raise ValueError("operator is not positive definite")


def pcg_solve(q: QuadraticProblem, apply_p: Callable, x0, iters: int, check: bool = True):
    """Linearly preconditioned CG, returning ``[x_0, x_1, ..., x_iters]``.

    Stops early only if the residual becomes exactly zero. Passing the
    identity as ``apply_p`` gives plain CG.
    """
    if check:
        check_spd_operator(apply_p, q.n)
    x = np.array(x0, dtype=np.float64, copy=True)
    r = q.A @ x - q.b
    y = apply_p(r)
    p = -y
    ry = float(r @ y)
    iterates = [x.copy()]
    for _ in range(iters):
        if not np.any(r):
            break
        ap = q.A @ p
        alpha = ry / float(p @ ap)
        x = x + alpha * p
        r = r + alpha * ap
        y = apply_p(r)
        ry_new = float(r @ y)
        beta = ry_new / ry
        p = -y + beta * p
        ry = ry_new
        iterates.append(x.copy())
    return iterates


def sgs_apply(A: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Apply ``M^{-1} r`` with ``M = (D + L) D^{-1} (D + L^T)``."""
    A = np.asarray(A, dtype=np.float64)
    d = np.diag(A)
    if np.any(d == 0):
        raise ValueError("symmetric Gauss-Seidel needs a nonzero diagonal")
    lower = np.tril(A)
    y = solve_triangular(lower, r, lower=True)
    return solve_triangular(lower.T, d * y, lower=False)


def sgs_preconditioner(q: QuadraticProblem) -> Callable:
    """Stationary SGS step ``x -> x - M^{-1}(A x - b)`` as a nonlinear preconditioner."""

    def apply(x):
        return x - sgs_apply(q.A, q.A @ x - q.b)

    return apply


def exact_quadratic_linesearch(q: QuadraticProblem, x, p) -> float:
    """Exact minimizer of ``phi(x + alpha p)`` over alpha."""
    curv = float(p @ q.A @ p)
    if curv <= 0:
        raise ValueError("p^T A p must be positive")
    return -float(q.gradient(x) @ p) / curv
