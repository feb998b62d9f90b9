"""Stopping rules and per-run records shared by all solvers."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .kruskal import KruskalModel


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    FEVAL_LIMIT = "FevalLimit"
    LINE_SEARCH_FAIL = "LineSearchFail"


@dataclass(frozen=True)
class StopRule:
    """Stop when ``||G||_2 / n_vars <= gtol`` or an iteration/evaluation cap binds."""

    gtol: float = 1e-9
    max_iterations: int = 10_000
    max_fevals: int = 100_000

    def __post_init__(self):
        if self.gtol < 0 or self.max_iterations < 1 or self.max_fevals < 1:
            raise ValueError("stop rule values must be positive")


@dataclass
class TraceRow:
    """One iterate of a run.

    Line-search solvers also fill the step fields, which describe the step
    taken *from* this iterate: ``slope = g_k.p_k``, the accepted ``alpha``
    and ``slope_next = g_{k+1}.p_k``. PNCG rows carry ``gbar_dot = g_k.gbar_k``
    and the descent ratio ``g_k.p_k / g_k.gbar_k``.
    """

    iteration: int
    f: float
    gnorm: float
    fevals: int
    elapsed: float
    alpha: float = math.nan
    slope: float = math.nan
    slope_next: float = math.nan
    ls_status: str = ""
    beta: float = math.nan
    gbar_dot: float = math.nan
    ratio: float = math.nan
    direction: str = ""


TRACE_COLUMNS = [f.name for f in fields(TraceRow)]


@dataclass
class SolverRun:
    status: Status
    x: np.ndarray
    iterations: int
    fevals: int
    gevals: int
    time_s: float
    trace: list = field(default_factory=list)
    grad_time_s: float = 0.0
    precond_calls: int = 0
    model: Optional[KruskalModel] = None
    c1: float = math.nan
    c2: float = math.nan

    @property
    def final_f(self) -> float:
        return self.trace[-1].f

    @property
    def final_gnorm(self) -> float:
        return self.trace[-1].gnorm

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED
