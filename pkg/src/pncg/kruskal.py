"""Rank-R Kruskal models and their flat vector representation."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .tensor import DenseTensor, _check_capacity, _data_lines


@dataclass(frozen=True, eq=False)
class KruskalModel:
    """Factor matrices ``A^(n)`` of shape ``(I_n, R)`` plus component weights."""

    factors: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        factors = tuple(np.array(a, dtype=np.float64, copy=True) for a in self.factors)
        if not factors:
            raise ValueError("a Kruskal model needs at least one factor")
        rank = factors[0].shape[1] if factors[0].ndim == 2 else 0
        if rank < 1 or any(a.ndim != 2 or a.shape[1] != rank for a in factors):
            raise ValueError("all factors must be 2-D with a common column count R >= 1")
        weights = np.ones(rank) if self.weights is None else np.array(self.weights, dtype=np.float64)
        if weights.shape != (rank,):
            raise ValueError(f"weights must have length {rank}")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        for arr in factors + (weights,):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model entries must be finite")
            arr.flags.writeable = False
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", weights)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.factors)

    @property
    def ndim(self) -> int:
        return len(self.factors)

    def __repr__(self):
        return f"KruskalModel(dims={self.dims}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class FlatPoint:
    """Factor matrices concatenated as ``vec(A^(1)), ..., vec(A^(N))``, each column-major."""

    values: np.ndarray
    dims: tuple
    rank: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        dims = tuple(int(d) for d in self.dims)
        if values.ndim != 1 or values.size != self.rank * sum(dims):
            raise ValueError(
                f"flat point of length {values.size} does not match dims {dims} and rank {self.rank}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dims", dims)


def full(m: KruskalModel) -> DenseTensor:
    """Dense reconstruction ``sum_r w_r a_r^(1) o ... o a_r^(N)``."""
    _check_capacity(m.dims)
    # columns of the Khatri-Rao product are the vectorized rank-one terms
    acc = m.factors[0] * m.weights
    for a in m.factors[1:]:
        acc = (a[:, None, :] * acc[None, :, :]).reshape(-1, m.rank)
    return DenseTensor.from_values(m.dims, acc.sum(axis=1))


def even_scaling(factors: Sequence[np.ndarray], weights: np.ndarray):
    """Array-level core of :func:`normalize_even`; returns ``(factors, weights)``."""
    norms = np.array([np.linalg.norm(a, axis=0) for a in factors])
    degenerate = np.any(norms == 0.0, axis=0)
    safe = np.where(norms == 0.0, 1.0, norms)
    target = (weights * np.prod(safe, axis=0)) ** (1.0 / len(factors))
    out = []
    for a, nrm in zip(factors, safe):
        scaled = a * (target / nrm)
        if degenerate.any():
            scaled[:, degenerate] = 0.0
        out.append(scaled)
    return out, np.where(degenerate, 0.0, 1.0)


def normalize_even(m: KruskalModel) -> KruskalModel:
    """Spread each component's weight evenly over its factor columns.

    The result represents the same tensor, has unit weights, and column ``r``
    of every factor has norm ``(w_r * prod_n ||a_r^(n)||) ** (1/N)``. A
    component with an all-zero column is degenerate: its columns are zeroed
    and its weight is set to 0, which is how it is flagged.
    """
    factors, weights = even_scaling(m.factors, m.weights)
    return KruskalModel(tuple(factors), weights)


def flatten(m: KruskalModel) -> FlatPoint:
    """Vectorize a model, folding any non-unit weights into the first factor."""
    factors = list(m.factors)
    if not np.all(m.weights == 1.0):
        factors[0] = factors[0] * m.weights
    values = np.concatenate([a.ravel(order="F") for a in factors])
    return FlatPoint(values, m.dims, m.rank)


def factor_views(values: np.ndarray, dims: Sequence[int], rank: int) -> list[np.ndarray]:
    """Zero-copy factor matrices over a flat vector."""
    out = []
    start = 0
    for d in dims:
        stop = start + d * rank
        out.append(values[start:stop].reshape((d, rank), order="F"))
        start = stop
    return out


def unflatten(p: FlatPoint) -> KruskalModel:
    return KruskalModel(tuple(factor_views(p.values, p.dims, p.rank)))


def format_model(m: KruskalModel) -> str:
    lines = [
        f"kruskal: {m.ndim} {m.rank}",
        "dims: " + " ".join(str(d) for d in m.dims),
        "lambda: " + " ".join(repr(float(w)) for w in m.weights),
    ]
    for n, a in enumerate(m.factors):
        lines.append(f"# factor {n + 1}, one column per line")
        for r in range(m.rank):
            lines.append(" ".join(repr(float(v)) for v in a[:, r]))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> KruskalModel:
    lines = list(_data_lines(text))
    if len(lines) < 3 or not lines[0].startswith("kruskal:"):
        raise ValueError("model text must start with a 'kruskal: N R' line")
    order, rank = (int(tok) for tok in lines[0][len("kruskal:"):].split())
    if not lines[1].startswith("dims:") or not lines[2].startswith("lambda:"):
        raise ValueError("expected 'dims:' and 'lambda:' lines after the header")
    dims = [int(tok) for tok in lines[1][len("dims:"):].split()]
    weights = [float(tok) for tok in lines[2][len("lambda:"):].split()]
    if len(dims) != order or len(weights) != rank:
        raise ValueError("header counts disagree with dims/lambda lines")
    values = np.array([float(tok) for line in lines[3:] for tok in line.split()])
    if values.size != rank * sum(dims):
        raise ValueError(f"expected {rank * sum(dims)} factor entries, found {values.size}")
    factors = factor_views(values, dims, rank)
    return KruskalModel(tuple(factors), np.array(weights))


def write_model(m: KruskalModel, path) -> None:
    Path(path).write_text(format_model(m))


def read_model(path) -> KruskalModel:
    return parse_model(Path(path).read_text())
