"""Solver names used by the CLI and benchmark: ``als``, ``ncg-*``, ``pncg-{t,h}-*``."""
from __future__ import annotations

from .als import als_solve
from .cg import BetaVariant, Family, Flavor, cp_ncg, cp_pncg
from .kruskal import KruskalModel
from .linesearch import LineSearchParams
from .objective import ObjectiveWorkspace
from .runs import SolverRun, StopRule

FAMILIES = ("fr", "pr", "hs")
SOLVER_NAMES = (
    ["als"]
    + [f"ncg-{f}" for f in FAMILIES]
    + [f"pncg-{fl}-{f}" for fl in ("t", "h") for f in FAMILIES]
)
_FLAVOR_CODES = {"t": Flavor.TILDE, "h": Flavor.HAT}


def parse_solver(name: str):
    """Return ``("als", None)``, ``("ncg", variant)`` or ``("pncg", variant)``."""
    key = name.strip().lower()
    if key == "als":
        return "als", None
    parts = key.split("-")
    if len(parts) == 2 and parts[0] == "ncg" and parts[1] in FAMILIES:
        return "ncg", BetaVariant(Family(parts[1].upper()), Flavor.PLAIN)
    if len(parts) == 3 and parts[0] == "pncg" and parts[1] in _FLAVOR_CODES and parts[2] in FAMILIES:
        return "pncg", BetaVariant(Family(parts[2].upper()), _FLAVOR_CODES[parts[1]])
    raise ValueError(f"unknown solver {name!r}; choose from {', '.join(SOLVER_NAMES)}")


def family_of(name: str) -> str | None:
    """``FR``/``PR``/``HS`` for line-search solvers, None for ALS."""
    kind, variant = parse_solver(name)
    return None if variant is None else variant.family.value


def run_solver(
    name: str,
    m0: KruskalModel,
    ws: ObjectiveWorkspace,
    stop: StopRule = StopRule(),
    ls: LineSearchParams = LineSearchParams(),
    restart_period: int = 0,
    normalize_precond: bool = False,
) -> SolverRun:
    kind, variant = parse_solver(name)
    if kind == "als":
        return als_solve(m0, ws, stop)
    if kind == "ncg":
        return cp_ncg(m0, ws, variant.family.value, ls, stop, restart_period)
    return cp_pncg(m0, ws, variant, ls, stop, restart_period, normalize_precond)
