"""Command-line interface: ``polyfw generate | solve | bench``.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime or I/O errors.
Progress messages go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    COMPARED,
    SOLVERS,
    Scenario,
    desk_grid,
    emit_results,
    normalize_traces,
    records_from_traces,
    run_grid,
    run_solver,
)

log = logging.getLogger("polyfw")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _psnr(text):
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("psnr must be a number or 'inf'")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more progress output on stderr")
    common.add_argument("--seed", type=int, help="global seed override")
    common.add_argument("--lambda-factor", type=float, help="lam = factor * ||G* y||_inf")
    common.add_argument("--psnr", type=_psnr, help="noise PSNR in dB ('inf' for noiseless)")
    common.add_argument("--delta", type=float, help="P-FW exploration width (absolute)")
    common.add_argument("--eps0", type=float, help="P-FW initial subsolver precision")
    common.add_argument("--tol", type=float, help="stopping tolerance for all solvers")
    common.add_argument("--max-iter", type=int, help="iteration cap for all solvers")
    common.add_argument("--time-budget", type=float, help="wall-time budget per solver, seconds")

    sizes = _Parser(add_help=False)
    sizes.add_argument("--n", type=int, help="image side length")
    sizes.add_argument("--k", type=int, help="number of nonzero pixels")
    sizes.add_argument("--alpha", type=int, help="measurements per nonzero pixel (L = alpha * K)")

    p = _Parser(prog="polyfw", description="Polyatomic Frank-Wolfe LASSO benchmark")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common, sizes], help="write a scenario file")
    g.add_argument("--solver", action="append", choices=SOLVERS, help="solver to include (repeatable)")
    g.add_argument("--out", required=True, help="scenario JSON path, '-' for stdout")
    g.add_argument("--instance", help="also write the generated instance (x0, freqs, y) as JSON")

    s = sub.add_parser("solve", parents=[common, sizes], help="run one solver on a scenario")
    s.add_argument("scenario", nargs="?", help="scenario JSON (or give --n/--k/--alpha)")
    s.add_argument("--solver", required=True, choices=SOLVERS)
    s.add_argument("--out", help="trace file path")
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    b = sub.add_parser("bench", parents=[common], help="run scenario files or the desk grid")
    b.add_argument("scenarios", nargs="*", help="scenario JSON files (object or {'scenarios': [...]})")
    b.add_argument("--desk-grid", action="store_true", help="use the built-in desk-scale grid")
    b.add_argument("--seed-sweep", type=int, default=1, help="replicate each scenario over this many seeds")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    return p


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise RuntimeError(f"cannot read {path}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise RuntimeError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e


def _solver_overrides(args, name):
    out = {}
    if args.tol is not None:
        out["tol"] = args.tol
    if args.max_iter is not None:
        out["max_iter"] = args.max_iter
    if name == "pfw":
        if args.delta is not None:
            out["delta"] = args.delta
        if args.eps0 is not None:
            out["eps0"] = args.eps0
    return out


def _apply_overrides(d: dict, args) -> dict:
    d = dict(d)
    for key, attr in (("seed", "seed"), ("psnr_db", "psnr"), ("lambda_factor", "lambda_factor"),
                      ("time_budget", "time_budget")):
        val = getattr(args, attr, None)
        if val is not None:
            d[key] = None if (key == "psnr_db" and math.isinf(val)) else val
    if "solvers" in d:
        d["solvers"] = [{**s, **_solver_overrides(args, s["name"])} for s in d["solvers"]]
    return d


def _inline_scenario(args, solvers) -> Scenario:
    missing = [f"--{f}" for f in ("n", "k", "alpha") if getattr(args, f) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    if args.alpha * args.k > args.n * args.n:
        raise UsageError(f"alpha * K = {args.alpha * args.k} exceeds n^2 = {args.n * args.n}")
    d = {"seed": 0, "n": args.n, "K": args.k, "alpha": args.alpha,
         "solvers": [{"name": s} for s in solvers]}
    d = _apply_overrides(d, args)
    try:
        return Scenario.from_dict(d)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _load_scenarios(path) -> list:
    doc = _read_json(path)
    items = doc["scenarios"] if isinstance(doc, dict) and "scenarios" in doc else doc
    items = items if isinstance(items, list) else [items]
    try:
        return [dict(s) for s in items]
    except (TypeError, ValueError) as e:
        raise RuntimeError(f"{path}: expected scenario objects") from e


def cmd_generate(args) -> int:
    scen = _inline_scenario(args, args.solver or list(COMPARED))
    text = scen.to_json()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(args.out, text)
        log.info("wrote scenario %s (L=%d) to %s", scen.id, scen.L, args.out)
    if args.instance:
        inst = scen.instance()
        doc = {"scenario": scen.to_dict(), **inst.to_dict()}
        _write(args.instance, json.dumps(doc) + "\n")
    return 0


def _write(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as e:
        raise RuntimeError(f"cannot write {path}: {e.strerror or e}") from e


def cmd_solve(args) -> int:
    if args.scenario:
        items = _load_scenarios(args.scenario)
        if len(items) != 1:
            raise RuntimeError(f"{args.scenario}: expected exactly one scenario, found {len(items)}")
        d = items[0]
        listed = {s["name"]: s for s in d.get("solvers", [])}
        d["solvers"] = [listed.get(args.solver, {"name": args.solver})]
        d = _apply_overrides(d, args)
        try:
            scen = Scenario.from_dict(d)
        except (TypeError, ValueError) as e:
            raise RuntimeError(f"{args.scenario}: invalid scenario: {e}") from e
    else:
        scen = _inline_scenario(args, [args.solver])
    params = scen.solvers[0]
    inst = scen.instance()
    log.info("solving %s with %s", scen.id, args.solver)
    tr = run_solver(inst.problem, args.solver, params, scen.time_budget)
    P = inst.problem
    eta_sup = float(np.max(np.abs(P.op.adjoint(P.y - P.op.forward(tr.x))))) / P.lam
    if args.out:
        recs = normalize_traces(records_from_traces(scen.id, {args.solver: tr}))
        meta = {"scenario": scen.to_dict(), "solver": params, "termination": tr.reason}
        emit_results(recs, args.format, args.out, meta)
    print(f"solver: {args.solver}")
    print(f"final_objective: {tr.final_objective!r}")
    print(f"iterations: {tr.iterations}")
    print(f"eta_sup: {eta_sup!r}")
    print(f"support_size: {int(np.count_nonzero(tr.x))}")
    print(f"termination: {tr.reason}")
    return 0


def cmd_bench(args) -> int:
    dicts = []
    if args.desk_grid:
        dicts += [s.to_dict() for s in desk_grid(seed=0 if args.seed is None else args.seed)]
    for path in args.scenarios:
        dicts += _load_scenarios(path)
    if not dicts:
        raise UsageError("no scenarios given (pass scenario files or --desk-grid)")
    scenarios = []
    for d in dicts:
        d = _apply_overrides(d, args)
        for r in range(args.seed_sweep):
            dd = dict(d, seed=d.get("seed", 0) + r)
            try:
                scenarios.append(Scenario.from_dict(dd))
            except (TypeError, ValueError) as e:
                raise RuntimeError(f"invalid scenario {dd}: {e}") from e
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise RuntimeError(f"cannot create output directory {out}: {e.strerror or e}") from e
    status = run_grid(scenarios, out, args.format, args.jobs)
    failed = [sid for sid, err in status.items() if err]
    for sid, err in status.items():
        if err:
            log.warning("%s: failed", sid)
        else:
            log.info("%s: ok", sid)
    if failed:
        print(f"{len(failed)} of {len(status)} scenarios failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # usage errors, --help, --version
        return e.code
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"polyfw {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, OSError, ValueError) as e:
        print(f"polyfw {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
