"""Benchmark protocol: generated tensors x random starts x solvers.

Every trial draws its randomness from streams keyed by labels, never from
execution order, so results are identical for any worker count.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .linesearch import LineSearchParams
from .metrics import match_and_recover, performance_profile, validate_profile, write_profile_csv
from .objective import ObjectiveWorkspace
from .runs import TRACE_COLUMNS, Status, StopRule
from .solvers import FAMILIES, SOLVER_NAMES, parse_solver, run_solver
from .testgen import TestProblemSpec, collinearity_label, make_test_tensor, random_init, stream

log = logging.getLogger(__name__)

RUN_COLUMNS = [
    "I", "R", "C", "l1", "l2", "start_id", "solver", "status", "iters", "fevals", "gevals",
    "time_s", "grad_time_s", "final_f", "final_gnorm", "recovered", "min_congruence",
]
TIMING_COLUMNS = {"time_s", "grad_time_s", "elapsed"}
KEY_COLUMNS = ["I", "R", "C", "l1", "l2", "start_id", "solver"]


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple = (20,)
    ranks: tuple = (3, 5)
    collinearities: tuple = (0.5, 0.9)
    l1s: tuple = (1.0, 5.0, 10.0)
    l2s: tuple = (0.0, 1.0, 5.0)
    starts: int = 20
    solvers: tuple = tuple(SOLVER_NAMES)
    stop: StopRule = field(default_factory=StopRule)
    ls: LineSearchParams = field(default_factory=LineSearchParams)
    seed: int = 0
    out_dir: str = "bench_out"
    workers: int = 1
    restart_period: int = 0
    normalize_precond: bool = False
    save_traces: bool = False

    def validate(self) -> None:
        """Raise ValueError for anything that would fail later in the run."""
        for name in ("sizes", "ranks", "collinearities", "l1s", "l2s", "solvers"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must not be empty")
        if self.starts < 1:
            raise ValueError("starts must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.restart_period < 0:
            raise ValueError("restart_period must be nonnegative")
        for name in self.solvers:
            parse_solver(name)
        if len(set(self.solvers)) != len(self.solvers):
            raise ValueError("solver list has duplicates")
        for I, R, C, l1, l2 in self.cells_with_noise():
            TestProblemSpec(I, R, C, l1, l2, self.seed)
            if R > 8:
                raise ValueError("factor matching supports R <= 8")

    def cells(self):
        return [(I, R, C) for I in self.sizes for R in self.ranks for C in self.collinearities]

    def cells_with_noise(self):
        return [(I, R, C, l1, l2) for I, R, C in self.cells() for l1 in self.l1s for l2 in self.l2s]


PRESETS = {
    "desk": dict(sizes=(20,), starts=5, l1s=(1.0,), l2s=(0.0, 5.0)),
}

_INT_KEYS = {"starts", "seed", "workers", "restart_period"}
_BOOL_KEYS = {"normalize_precond", "save_traces"}
_STOP_KEYS = {"gtol": float, "max_iterations": int, "max_fevals": int}
_LS_KEYS = {"c1": float, "c2": float, "alpha0": float, "ls_max_iters": int}
_LIST_KEYS = {"sizes": int, "ranks": int, "collinearities": float, "l1s": float, "l2s": float, "solvers": str}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_from_mapping(values: dict, base: Optional[BenchConfig] = None) -> BenchConfig:
    """Build a config from string values keyed by field name (plus stop/line-search keys)."""
    cfg = base or BenchConfig()
    direct, stop, ls = {}, {}, {}
    for key, raw in values.items():
        if key in _LIST_KEYS:
            items = [v.strip() for v in str(raw).split(",") if v.strip()]
            direct[key] = tuple(_LIST_KEYS[key](v) for v in items)
        elif key in _INT_KEYS:
            direct[key] = int(raw)
        elif key in _BOOL_KEYS:
            direct[key] = _parse_bool(str(raw))
        elif key == "out_dir":
            direct[key] = str(raw).strip()
        elif key in _STOP_KEYS:
            stop[key] = _STOP_KEYS[key](raw)
        elif key in _LS_KEYS:
            ls["max_iters" if key == "ls_max_iters" else key] = _LS_KEYS[key](raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if stop:
        direct["stop"] = replace(cfg.stop, **stop)
    if ls:
        direct["ls"] = replace(cfg.ls, **ls)
    return replace(cfg, **direct)


def parse_config(text: str, base: Optional[BenchConfig] = None) -> BenchConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return config_from_mapping(values, base)


def load_config(path, preset: Optional[str] = None) -> BenchConfig:
    base = preset_config(preset) if preset else None
    return parse_config(Path(path).read_text(), base)


def preset_config(name: str) -> BenchConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return replace(BenchConfig(), **PRESETS[name])


@dataclass(frozen=True)
class Trial:
    I: int
    R: int
    C: float
    l1: float
    l2: float
    start_id: int


def trials(cfg: BenchConfig) -> list[Trial]:
    return [
        Trial(I, R, C, l1, l2, s)
        for I, R, C, l1, l2 in cfg.cells_with_noise()
        for s in range(cfg.starts)
    ]


def start_stream(seed: int, t: Trial) -> np.random.Generator:
    return stream(seed, "start", t.I, t.R, collinearity_label(t.C), float(t.l1), float(t.l2), t.start_id)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_trial(cfg: BenchConfig, t: Trial):
    """Run every configured solver from one shared start; returns (run rows, trace rows)."""
    tensor, truth = make_test_tensor(TestProblemSpec(t.I, t.R, t.C, t.l1, t.l2, cfg.seed))
    ws = ObjectiveWorkspace(tensor, t.R)
    m0 = random_init(tensor.dims, t.R, start_stream(cfg.seed, t))
    key = [t.I, t.R, float(t.C), float(t.l1), float(t.l2), t.start_id]
    rows, trace_rows = [], []
    for name in cfg.solvers:
        run = run_solver(name, m0, ws, cfg.stop, cfg.ls, cfg.restart_period, cfg.normalize_precond)
        report = match_and_recover(run.model, truth)
        rows.append(key + [
            name, run.status.value, run.iterations, run.fevals, run.gevals, run.time_s,
            run.grad_time_s, run.final_f, run.final_gnorm, report.recovered, report.min_congruence,
        ])
        if cfg.save_traces:
            for tr in run.trace:
                trace_rows.append(key + [name] + [getattr(tr, c) for c in TRACE_COLUMNS])
    return rows, trace_rows


def _run_trial_star(args):
    return run_trial(*args)


def _check_writable(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("ok")
    probe.unlink()


def run_benchmark(cfg: BenchConfig, progress: bool = False) -> Path:
    """Run the full protocol and write ``runs.csv`` (and ``traces.csv``) to ``cfg.out_dir``."""
    cfg.validate()
    out = Path(cfg.out_dir)
    _check_writable(out)
    todo = trials(cfg)
    jobs = [(cfg, t) for t in todo]
    if cfg.workers == 1:
        results = map(_run_trial_star, jobs)
        results = list(_report(results, len(jobs), progress))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            # map preserves submission order, so output order never depends on scheduling
            results = list(_report(pool.map(_run_trial_star, jobs), len(jobs), progress))

    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_COLUMNS)
        for rows, _ in results:
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    if cfg.save_traces:
        with open(out / "traces.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(KEY_COLUMNS + list(TRACE_COLUMNS))
            for _, trace_rows in results:
                for row in trace_rows:
                    w.writerow([_fmt(v) for v in row])
    return out


def _report(results: Iterable, total: int, progress: bool):
    for k, item in enumerate(results, 1):
        if progress:
            log.info("trial %d/%d done", k, total)
        yield item


def read_runs(path) -> list[dict]:
    """Load ``runs.csv`` with numeric columns converted."""
    conv = {
        "I": int, "R": int, "C": float, "l1": float, "l2": float, "start_id": int,
        "iters": int, "fevals": int, "gevals": int, "time_s": float, "grad_time_s": float,
        "final_f": float, "final_gnorm": float, "min_congruence": float,
        "recovered": _parse_bool,
    }
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RUN_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path} lacks columns {sorted(missing)}")
        return [{k: conv.get(k, str)(v) for k, v in row.items()} for row in reader]


def read_traces(path) -> list[dict]:
    """Load ``traces.csv``; empty cells become NaN for numeric columns."""
    text_cols = {"solver", "ls_status", "direction"}
    int_cols = {"I", "R", "start_id", "iteration", "fevals"}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if k in text_cols:
                    rec[k] = v
                elif k in int_cols:
                    rec[k] = int(v)
                else:
                    rec[k] = float(v) if v not in ("", "None") else math.nan
            out.append(rec)
    return out


def _sample_std(x: Sequence[float]) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else math.nan


def format_cell(mean: float, std: float, converged: int, recovered: int) -> str:
    def num(v):
        return "nan" if not math.isfinite(v) else f"{v:.4f}"
    return f"{num(mean)} ± {num(std)} ({converged}) ({recovered})"


def summarize_records(records: list[dict]) -> list[dict]:
    """Table cells per (I, R, C, solver): timing over converged runs, counts over all runs."""
    if not records:
        raise ValueError("no run records to summarize")
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r["I"], r["R"], r["C"], r["solver"]), []).append(r)
    order = {name: k for k, name in enumerate(SOLVER_NAMES)}
    cells = []
    for (I, R, C, solver), rows in sorted(groups.items(), key=lambda kv: kv[0][:3] + (order.get(kv[0][3], 99),)):
        times = [r["time_s"] for r in rows if r["status"] == Status.CONVERGED.value]
        mean = float(np.mean(times)) if times else math.nan
        std = _sample_std(times)
        conv, rec = len(times), sum(bool(r["recovered"]) for r in rows)
        cells.append({
            "I": I, "R": R, "C": C, "solver": solver, "runs": len(rows),
            "mean_time": None if math.isnan(mean) else mean,
            "std_time": None if math.isnan(std) else std,
            "converged": conv, "recovered": rec,
            "cell": format_cell(mean, std, conv, rec),
        })
    return cells


def profile_groups(solvers: Sequence[str]) -> dict[str, list[str]]:
    """Solver groups ``{ALS, NCG-x, PNCG-t-x, PNCG-h-x}`` for each family x present."""
    groups = {}
    for fam in FAMILIES:
        members = [s for s in ("als", f"ncg-{fam}", f"pncg-t-{fam}", f"pncg-h-{fam}") if s in solvers]
        if any(s != "als" for s in members):
            groups[fam.upper()] = members
    return groups


def write_profiles(records: list[dict], out_dir) -> list[Path]:
    """One profile CSV per (I, R, C) and solver group; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_cell: dict[tuple, dict] = {}
    for r in records:
        problem = (r["l1"], r["l2"], r["start_id"])
        by_cell.setdefault((r["I"], r["R"], r["C"]), {}).setdefault(problem, {})[r["solver"]] = r
    written = []
    for (I, R, C), problems in sorted(by_cell.items()):
        present = sorted({s for runs in problems.values() for s in runs})
        for fam, members in profile_groups(present).items():
            keys = [p for p in sorted(problems) if all(s in problems[p] for s in members)]
            if not keys:
                continue
            times = np.array([[problems[p][s]["time_s"] for s in members] for p in keys])
            conv = np.array([[problems[p][s]["status"] == Status.CONVERGED.value for s in members] for p in keys])
            prof = performance_profile(times, conv, members)
            validate_profile(prof)
            path = out / f"profile_I{I}_R{R}_C{C:g}_{fam}.csv"
            write_profile_csv(prof, path)
            written.append(path)
    return written


def summarize(out_dir) -> list[dict]:
    """Write ``summary.json`` and the profile CSVs for the runs in ``out_dir``."""
    out = Path(out_dir)
    records = read_runs(out / "runs.csv")
    cells = summarize_records(records)
    (out / "summary.json").write_text(json.dumps(cells, indent=2) + "\n")
    write_profiles(records, out)
    return cells


def format_summary(cells: list[dict]) -> str:
    lines = []
    last = None
    for c in cells:
        head = (c["I"], c["R"], c["C"])
        if head != last:
            lines.append(f"I={c['I']} R={c['R']} C={c['C']:g}")
            last = head
        lines.append(f"  {c['solver']:<10} {c['cell']}")
    return "\n".join(lines)

