"""CP objective ``f = 1/2 ||X - [[A^(1), ..., A^(N)]]||_F^2`` and its gradient.

Both are evaluated in expanded form from Gram matrices and MTTKRP products,
so the reconstruction is never materialized.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .kruskal import FlatPoint, KruskalModel, factor_views, flatten
from .tensor import DenseTensor, khatri_rao, matricize


def gamma(grams: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Elementwise product of every Gram matrix except mode ``n``."""
    out = None
    for m, g in enumerate(grams):
        if m != n:
            out = g if out is None else out * g
    if out is None:
        rank = np.asarray(grams[0]).shape[0]
        return np.ones((rank, rank))
    return np.array(out, dtype=np.float64)


# rounding allowance, in ulps of the magnitude of the cancelled terms
_NOISE_ULPS = 32


class ObjectiveWorkspace:
    """Per-problem cache for the CP objective.

    Holds the data tensor, ``||X||^2``, the mode unfoldings (computed once so
    each MTTKRP is a single matrix product) and evaluation counters. A
    workspace belongs to one solver run at a time.
    """

    def __init__(self, tensor: DenseTensor, rank: int):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.tensor = tensor
        self.rank = int(rank)
        self.dims = tensor.dims
        self.norm_sq = float(np.dot(tensor.data.ravel(), tensor.data.ravel()))
        self.unfoldings = [np.ascontiguousarray(matricize(tensor, n)) for n in range(tensor.ndim)]
        # modes [0, split) as rows and [split, N) as columns, for the shared MTTKRP pass
        self.split = max(1, tensor.ndim // 2)
        rows = int(np.prod(self.dims[:self.split]))
        self.split_unfolding = np.ascontiguousarray(tensor.data.reshape(rows, -1, order="F"))
        self.n_vars = self.rank * sum(self.dims)
        self.f_evals = 0
        self.g_evals = 0
        self.f_scale = self.norm_sq

    @property
    def f_noise(self) -> float:
        """Rounding floor of the expanded-form objective at the latest evaluation.

        The expanded form cancels ``||X||^2``, the cross term and the model
        norm against each other. The result can be far smaller than those
        terms (much smaller still when diverging components cancel), so
        objective differences below a few ulps of their magnitude carry no
        information.
        """
        return _NOISE_ULPS * np.finfo(np.float64).eps * self.f_scale

    def reset_counters(self) -> None:
        self.f_evals = 0
        self.g_evals = 0

    def factors(self, x: np.ndarray) -> list[np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars,):
            raise ValueError(f"point of shape {x.shape} does not match {self.n_vars} variables")
        return factor_views(x, self.dims, self.rank)

    def mttkrp(self, factors: Sequence[np.ndarray], n: int) -> np.ndarray:
        others = [factors[m] for m in reversed(range(len(factors))) if m != n]
        if not others:
            return np.repeat(self.unfoldings[n], self.rank, axis=1)
        return self.unfoldings[n] @ khatri_rao(others)

    def all_mttkrp(self, factors: Sequence[np.ndarray]) -> list[np.ndarray]:
        """MTTKRP for every mode, sharing two large contractions between them.

        The leading block of modes is contracted against the trailing factors
        once (and vice versa); each mode then only needs the small remaining
        contraction inside its own block.
        """
        n_modes = len(factors)
        if n_modes == 1:
            return [self.mttkrp(factors, 0)]
        s = self.split
        lead = self.split_unfolding @ khatri_rao(factors[:s - 1:-1])
        trail = self.split_unfolding.T @ khatri_rao(factors[s - 1::-1])
        return self._within_block(lead, factors[:s]) + self._within_block(trail, factors[s:])

    def _within_block(self, partial: np.ndarray, block: Sequence[np.ndarray]) -> list[np.ndarray]:
        k = len(block)
        if k == 1:
            return [partial]
        t = partial.reshape(*(a.shape[0] for a in block), self.rank, order="F")
        out = []
        for j in range(k):
            operands = [t, list(range(k + 1))]
            for m in range(k):
                if m != j:
                    operands += [block[m], [m, k]]
            out.append(np.einsum(*operands, [j, k]))
        return out

    def _value(self, factors, grams, last_mttkrp, last_mode) -> float:
        cross = float(np.vdot(factors[last_mode], last_mttkrp))
        model_terms = (gamma(grams, last_mode) * grams[last_mode]).ravel()
        model_sq = float(model_terms.sum())
        self.f_scale = self.norm_sq + 2.0 * abs(cross) + float(np.abs(model_terms).sum())
        return 0.5 * (self.norm_sq - 2.0 * cross + model_sq)

    def f(self, x: np.ndarray) -> float:
        factors = self.factors(x)
        grams = [a.T @ a for a in factors]
        last = len(factors) - 1
        self.f_evals += 1
        return self._value(factors, grams, self.mttkrp(factors, last), last)

    def g(self, x: np.ndarray) -> np.ndarray:
        return self.fg(x, count_f=False)[1]

    def fg(self, x: np.ndarray, count_f: bool = True) -> tuple[float, np.ndarray]:
        """Objective and gradient sharing one MTTKRP per mode."""
        factors = self.factors(x)
        grams = [a.T @ a for a in factors]
        products = self.all_mttkrp(factors)
        blocks = [(a @ gamma(grams, n) - m).ravel(order="F") for n, (a, m) in enumerate(zip(factors, products))]
        last = len(factors) - 1
        value = self._value(factors, grams, products[last], last)
        if count_f:
            self.f_evals += 1
        self.g_evals += 1
        return value, np.concatenate(blocks)


def objective(p: FlatPoint, ws: ObjectiveWorkspace) -> float:
    _check_point(p, ws)
    return ws.f(p.values)


def gradient(p: FlatPoint, ws: ObjectiveWorkspace) -> FlatPoint:
    _check_point(p, ws)
    return FlatPoint(ws.g(p.values), p.dims, p.rank)


def model_objective(m: KruskalModel, ws: ObjectiveWorkspace) -> float:
    return objective(flatten(m), ws)


def _check_point(p: FlatPoint, ws: ObjectiveWorkspace) -> None:
    if tuple(p.dims) != tuple(ws.dims) or p.rank != ws.rank:
        raise ValueError(
            f"point with dims {p.dims}, rank {p.rank} does not match workspace "
            f"dims {ws.dims}, rank {ws.rank}"
        )
