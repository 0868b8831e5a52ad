"""Benchmark harness: run solvers on seeded scenarios and write normalized traces.

A scenario fixes one generated instance; every configured solver runs on
that same instance, sequentially. Objective curves are normalized per
scenario as ``(L_k - L*) / (L_0 - L*)`` where ``L_0`` is the objective at
``x = 0`` and ``L*`` the lowest objective any solver reached.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .problems import DEFAULT_AMPLITUDE, Instance, build_instance
from .solvers import PfwConfig, SolverTrace, run_apgd, run_pfw, run_vfw

log = logging.getLogger(__name__)

__all__ = [
    "SOLVERS",
    "SOLVER_DEFAULTS",
    "NORMALIZATION",
    "Scenario",
    "BenchmarkRecord",
    "resolve_solver",
    "run_solver",
    "run_traces",
    "records_from_traces",
    "run_benchmark",
    "normalize_traces",
    "emit_results",
    "load_results",
    "write_plot_data",
    "run_scenario_to_dir",
    "run_grid",
    "desk_grid",
]

SOLVER_DEFAULTS = {
    "apgd": {"max_iter": 10_000, "tol": 1e-10},
    "ista": {"max_iter": 10_000, "tol": 1e-10},
    "vfw": {"max_iter": 10_000, "tol": 1e-8, "window": 10},
    "pfw": {
        "max_iter": 1000,
        "tol": 1e-4,
        "delta": None,
        "delta_factor": 0.05,
        "eps0": 1e-2,
        "sub_iter_cap": 10_000,
        "window": 10,
        "obj_tol": 1e-10,
    },
}
SOLVERS = tuple(SOLVER_DEFAULTS)
COMPARED = ("apgd", "pfw", "vfw")

NORMALIZATION = (
    "normalized_objective = clip((L_k - L_star) / (L_0 - L_star), 0, 1); "
    "L_0 = objective at x = 0, L_star = lowest objective reached by any solver in the scenario; "
    "0 everywhere when L_0 == L_star"
)

FIELDS = (
    "scenario_id",
    "solver",
    "iter",
    "time_s",
    "objective",
    "normalized_objective",
    "forward_count",
    "adjoint_count",
    "support_size",
)


def resolve_solver(name: str, params: dict | None = None) -> dict:
    """Solver parameters with every default filled in."""
    if name not in SOLVER_DEFAULTS:
        raise ValueError(f"unknown solver {name!r}; valid names: {', '.join(SOLVERS)}")
    out = dict(SOLVER_DEFAULTS[name])
    for key, val in (params or {}).items():
        if key == "name":
            continue
        if key not in out:
            raise ValueError(f"unknown parameter {key!r} for solver {name!r}")
        out[key] = val
    return {"name": name, **out}


def run_solver(problem, name: str, params: dict | None = None, time_budget=None) -> SolverTrace:
    p = resolve_solver(name, params)
    if name in ("apgd", "ista"):
        return run_apgd(problem, p["max_iter"], p["tol"], accelerated=name == "apgd", time_budget=time_budget)
    if name == "vfw":
        return run_vfw(problem, p["max_iter"], p["tol"], window=p["window"], time_budget=time_budget)
    cfg = PfwConfig(**{f.name: p[f.name] for f in fields(PfwConfig)})
    return run_pfw(problem, cfg, time_budget=time_budget)


@dataclass
class Scenario:
    seed: int
    n: int
    K: int
    alpha: int
    psnr_db: float | None = 20.0
    lambda_factor: float = 0.1
    solvers: list = field(default_factory=lambda: [{"name": s} for s in COMPARED])
    time_budget: float | None = None
    amplitude: tuple = DEFAULT_AMPLITUDE

    def __post_init__(self):
        if self.n < 1 or self.K < 0 or self.alpha < 1:
            raise ValueError(f"invalid scenario sizes n={self.n}, K={self.K}, alpha={self.alpha}")
        if self.L > self.n * self.n:
            raise ValueError(f"alpha * K = {self.L} exceeds n^2 = {self.n * self.n}")
        if not 0 < self.lambda_factor < 1:
            raise ValueError(f"lambda_factor must lie in (0, 1), got {self.lambda_factor}")
        if self.psnr_db is not None and math.isinf(self.psnr_db):
            self.psnr_db = None
        self.solvers = [resolve_solver(s["name"], s) for s in self.solvers]
        self.amplitude = tuple(float(a) for a in self.amplitude)

    @property
    def L(self) -> int:
        return self.alpha * self.K

    @property
    def id(self) -> str:
        return f"n{self.n}_K{self.K}_a{self.alpha}_seed{self.seed}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["amplitude"] = list(self.amplitude)
        d["L"] = self.L
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        d.pop("L", None)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def instance(self) -> Instance:
        return build_instance(self.seed, self.n, self.K, self.alpha, self.psnr_db, self.lambda_factor, self.amplitude)


@dataclass
class BenchmarkRecord:
    scenario_id: str
    solver: str
    iter: int
    time_s: float
    objective: float
    normalized_objective: float
    forward_count: int
    adjoint_count: int
    support_size: int


def run_traces(scenario: Scenario, instance: Instance | None = None) -> dict:
    """Run every configured solver on the scenario's instance; returns ``{name: trace}``."""
    inst = scenario.instance() if instance is None else instance
    traces = {}
    for params in scenario.solvers:
        name = params["name"]
        log.info("%s: running %s", scenario.id, name)
        traces[name] = run_solver(inst.problem, name, params, scenario.time_budget)
        tr = traces[name]
        log.info("%s: %s stopped (%s) after %d iterations, objective %.10g",
                 scenario.id, name, tr.reason, tr.iterations, tr.final_objective)
    return traces


def records_from_traces(scenario_id: str, traces: dict) -> list:
    return [
        BenchmarkRecord(
            scenario_id, name, r.iter, r.time_s, r.objective, math.nan,
            r.forward_count, r.adjoint_count, r.support_size,
        )
        for name, tr in traces.items()
        for r in tr.rows
    ]


def run_benchmark(scenario: Scenario) -> list:
    """Generate the instance once, run all solvers on it, return normalized records."""
    traces = run_traces(scenario)
    return normalize_traces(records_from_traces(scenario.id, traces))


def normalize_traces(records, initial: dict | None = None) -> list:
    """Fill ``normalized_objective`` per scenario.

    ``initial`` optionally maps scenario ids to the objective at zero; by
    default it is read from the iteration-0 records.
    """
    by_sid = {}
    for r in records:
        by_sid.setdefault(r.scenario_id, []).append(r)
    ref = {}
    for sid, recs in by_sid.items():
        if initial is not None and sid in initial:
            L0 = initial[sid]
        else:
            zeros = [r.objective for r in recs if r.iter == 0]
            L0 = max(zeros) if zeros else max(r.objective for r in recs)
        ref[sid] = (L0, min(r.objective for r in recs))
    out = []
    for r in records:
        L0, Ls = ref[r.scenario_id]
        span = L0 - Ls
        val = 0.0 if span <= 0 else min(max((r.objective - Ls) / span, 0.0), 1.0)
        out.append(replace(r, normalized_objective=val))
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _atomic_write(path: Path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def _meta_lines(meta):
    if not meta:
        return ""
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())


def emit_results(records, fmt: str, path, meta: dict | None = None) -> Path:
    """Write records as CSV or JSON.

    CSV metadata, when given, goes in leading ``# key: json`` comment lines.
    Floats are written with ``repr`` so they round-trip exactly.
    """
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(_meta_lines(meta))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in FIELDS])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {"meta": meta or {}, "records": [asdict(r) for r in records]}
        text = json.dumps(doc, indent=1, allow_nan=True) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")
    _atomic_write(path, text)
    return path


def load_results(path) -> tuple:
    """Inverse of :func:`emit_results`; returns ``(records, meta)``."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        return [BenchmarkRecord(**r) for r in doc["records"]], doc.get("meta", {})
    meta = {}
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("# ") and not body:
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        else:
            body.append(line)
    types = {f.name: f.type for f in fields(BenchmarkRecord)}
    conv = {"str": str, "int": int, "float": float}
    recs = []
    for row in csv.DictReader(body):
        recs.append(BenchmarkRecord(**{k: conv[types[k]](v) for k, v in row.items()}))
    return recs, meta


def write_plot_data(records, out_dir, scenario_id: str, meta: dict | None = None) -> list:
    """One two-column ``time_s normalized_objective`` file per solver."""
    paths = []
    solvers = dict.fromkeys(r.solver for r in records if r.scenario_id == scenario_id)
    for name in solvers:
        lines = [_meta_lines(meta), "# time_s normalized_objective\n"]
        lines += [f"{r.time_s!r} {r.normalized_objective!r}\n"
                  for r in records if r.scenario_id == scenario_id and r.solver == name]
        path = Path(out_dir) / f"{scenario_id}_{name}.dat"
        _atomic_write(path, "".join(lines))
        paths.append(path)
    return paths


def _summary(traces):
    return {
        name: {"reason": tr.reason, "iterations": tr.iterations, "final_objective": tr.final_objective}
        for name, tr in traces.items()
    }


def run_scenario_to_dir(scenario: Scenario, out_dir, fmt: str = "csv", plot_data: bool = True) -> list:
    """Run one scenario and write its result (and plot-data) files; returns written paths."""
    traces = run_traces(scenario)
    recs = normalize_traces(records_from_traces(scenario.id, traces))
    zero = [r.objective for r in recs if r.iter == 0]
    meta = {
        "scenario": scenario.to_dict(),
        "normalization": NORMALIZATION,
        "L0": max(zero) if zero else None,
        "L_star": min(r.objective for r in recs) if recs else None,
        "termination": {k: v["reason"] for k, v in _summary(traces).items()},
    }
    out_dir = Path(out_dir)
    paths = [emit_results(recs, fmt, out_dir / f"{scenario.id}.{fmt}", meta)]
    if plot_data:
        paths += write_plot_data(recs, out_dir, scenario.id, {"scenario_id": scenario.id, "seed": scenario.seed})
    return paths


def _grid_worker(args):
    scen_dict, out_dir, fmt = args
    scenario = Scenario.from_dict(scen_dict)
    try:
        run_scenario_to_dir(scenario, out_dir, fmt)
        return scenario.id, None
    except Exception:
        err = traceback.format_exc()
        _atomic_write(Path(out_dir) / f"{scenario.id}.error.txt", err)
        return scenario.id, err


def run_grid(scenarios, out_dir, fmt: str = "csv", jobs: int = 1) -> dict:
    """Run scenarios (in parallel when ``jobs > 1``); returns ``{scenario_id: error or None}``.

    Each scenario's files are written as soon as it completes, so an
    interrupted grid leaves the finished ones intact.
    """
    tasks = [(s.to_dict(), str(out_dir), fmt) for s in scenarios]
    if jobs <= 1:
        results = map(_grid_worker, tasks)
        return dict(results)
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return dict(ex.map(_grid_worker, tasks))


def desk_grid(seed: int = 0, psnr_db: float = 20.0, lambda_factor: float = 0.1, solvers=None, time_budget=None) -> list:
    """Benchmark grid shrunk to desk scale: K scaled with the image area from (50, 100, 200) at n = 101."""
    out = []
    for n in (32, 64, 101):
        for K0 in (50, 100, 200):
            K = max(1, round(K0 * n * n / 101**2))
            for alpha in (8, 16):
                kw = {} if solvers is None else {"solvers": [dict(s) for s in solvers]}
                out.append(Scenario(seed, n, K, alpha, psnr_db, lambda_factor, time_budget=time_budget, **kw))
    return out
