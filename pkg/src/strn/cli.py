"""Command line interface: ``strn solve | sweep | list | export | check``.

``solve`` exits with the solver termination code (0 converged, 1-6 failures).
Other subcommands exit 0 on success, 64 on usage errors and 65 on data or
parse errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import suite
from .dsl import load_problem_file, serialize_problem
from .errors import DSLError, InvalidParameters, InvalidStartingPoint, InvalidSweep, StrnError, UnknownProblem
from .solver import SolverParameters, solve, solve_with_variable_theta
from .sweep import (
    SWEEPABLE,
    SweepSpecification,
    emit_csv,
    emit_iteration_table,
    emit_profile_data,
    run_sweep,
    sensitivity,
)

EX_USAGE = 64
EX_DATAERR = 65

_PARAM_FLAGS = {
    "delta0": float, "theta": float, "alpha1": float, "alpha2": float, "beta1": float,
    "beta2": float, "beta3": float, "gamma": float, "max_iterations": int, "max_residual_evals": int,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver parameters (defaults as tuned in the reference experiments)")
    defaults = SolverParameters()
    for name, kind in _PARAM_FLAGS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None,
                           metavar="V", help=f"default {getattr(defaults, name)}")


def _params_from(args) -> SolverParameters:
    overrides = {name: getattr(args, name) for name in _PARAM_FLAGS if getattr(args, name) is not None}
    try:
        return replace(SolverParameters(), **overrides)
    except InvalidParameters as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strn", description="Scaled trust-region Newton solver for box-constrained nonlinear systems.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one problem from one starting point")
    p.add_argument("problem", help="built-in problem name or path to a .nls file")
    p.add_argument("--start", type=int, default=0, help="0-based starting point index")
    p.add_argument("--variable-theta", action="store_true", help="restart over the theta schedule until converged")
    p.add_argument("--trace", action="store_true", help="print (or include in JSON) the iteration trace")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    _add_param_flags(p)

    p = sub.add_parser("sweep", help="vary one parameter over a grid on a problem set")
    p.add_argument("--param", required=True, choices=SWEEPABLE)
    p.add_argument("--values", help="comma-separated grid (default: the reference grid)")
    p.add_argument("--problems", help="comma-separated problem names or .nls paths (default: whole suite)")
    p.add_argument("--starts", help="comma-separated 0-based start indices (default: all)")
    p.add_argument("--out", help="CSV destination (default: stdout)")
    p.add_argument("--table", action="store_true", help="print markdown iteration tables")
    p.add_argument("--all-rows", action="store_true", help="tables include insensitive rows")
    p.add_argument("--profile", action="store_true", help="print tab-separated performance-profile data")
    p.add_argument("--zero-elapsed", action="store_true", help="write 0 in the elapsed_ms column")
    p.add_argument("--variable-theta", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    _add_param_flags(p)

    p = sub.add_parser("list", help="list built-in problems")
    p.add_argument("filter", nargs="?", default="")

    p = sub.add_parser("export", help="write a built-in problem as a .nls file")
    p.add_argument("problem")
    p.add_argument("--out", required=True)

    p = sub.add_parser("check", help="parse and validate a .nls file")
    p.add_argument("file")
    return parser


def _load(name: str):
    if name.endswith(".nls") or os.path.sep in name:
        return load_problem_file(name)
    return suite.get_problem(name)


def _csv_list(text: Optional[str], kind):
    if text is None:
        return None
    try:
        return [kind(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse list {text!r}: {exc}") from exc


def _cmd_solve(args, out) -> int:
    problem = _load(args.problem)
    if not 0 <= args.start < len(problem.starting_points):
        raise UsageError(f"--start {args.start}: {problem.name} has {len(problem.starting_points)} starting points")
    params = _params_from(args)
    x0 = problem.starting_points[args.start]
    runner = solve_with_variable_theta if args.variable_theta else solve
    report = runner(problem, x0, params, trace=args.trace)
    if args.json:
        out.write(json.dumps(dict(problem=problem.name, start_index=args.start, **report.to_dict()), indent=2) + "\n")
        return int(report.reason)
    with np.printoptions(precision=12):
        out.write(f"problem      {problem.name} (start {args.start})\n")
        out.write(f"termination  {int(report.reason)} {report.reason.label}\n")
        out.write(f"x            {np.array2string(report.final_x, separator=', ')}\n")
        out.write(f"||F(x)||     {report.final_residual_norm:.6e}\n")
        out.write(f"iterations   {report.iterations}\n")
        out.write(f"F-evals      {report.residual_evals}\n")
        out.write(f"J-evals      {report.jacobian_evals}\n")
    if args.variable_theta:
        for a in report.attempts:
            out.write(f"  theta={a.theta:<8g} {a.reason.label:<20} iterations={a.iterations}\n")
    if args.trace and report.trace:
        out.write("k  ||F||  delta_before  delta_after  kind  rho_c  rho_f  rejections\n")
        for r in report.trace:
            out.write(f"{r.k} {r.residual_norm:.3e} {r.delta_before:.3e} {r.delta_after:.3e} "
                      f"{r.step_kind.value} {r.rho_c:.4g} {r.rho_f:.4g} {r.inner_rejections}\n")
    return int(report.reason)


def _cmd_sweep(args, out) -> int:
    base = _params_from(args)
    values = _csv_list(args.values, float)
    starts = _csv_list(args.starts, int)
    names = _csv_list(args.problems, str)
    catalog = None
    if names is not None and any(n.endswith(".nls") for n in names):
        loaded = [_load(n) for n in names]
        catalog = {p.name: p for p in loaded}
        names = [p.name for p in loaded]
    spec = SweepSpecification(
        parameter=args.param, values=values, problems=names,
        start_indices="all" if starts is None else starts,
        base=base, variable_theta=args.variable_theta,
    )
    try:
        records = run_sweep(spec, workers=max(args.workers, 1), catalog=catalog)
    except InvalidSweep as exc:
        raise UsageError(str(exc)) from exc
    data = emit_csv(records, args.out, zero_elapsed=args.zero_elapsed)
    if args.out is None:
        out.write(data.decode("utf-8"))
    if args.table:
        out.write(emit_iteration_table(records, include_all=args.all_rows) + "\n")
        report = sensitivity(records)
        out.write(f"sensitive problems: {report.n_sensitive}, insensitive: {report.n_insensitive}\n")
    if args.profile:
        out.write(emit_profile_data(records))
    return 0


def _cmd_list(args, out) -> int:
    rows = suite.list_problems(args.filter)
    out.write(f"{'problem':<28}{'n':>4}{'starts':>8}\n")
    for name, n, starts in rows:
        out.write(f"{name:<28}{n:>4}{starts:>8}\n")
    return 0


def _cmd_export(args, out) -> int:
    problem = suite.get_problem(args.problem)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_problem(problem))
    out.write(f"wrote {args.out}\n")
    return 0


def _cmd_check(args, out) -> int:
    problem = load_problem_file(args.file)
    out.write(f"ok: {problem.name}, {problem.dimension} variables, {len(problem.starting_points)} starting points\n")
    return 0


_COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "list": _cmd_list, "export": _cmd_export, "check": _cmd_check}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("strn: a subcommand is required (solve, sweep, list, export, check)")
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EX_USAGE
    except UnknownProblem as exc:
        err.write(f"error: {exc}\n")
        return EX_USAGE
    except (DSLError, InvalidStartingPoint) as exc:
        err.write(f"error: {exc}\n")
        return EX_DATAERR
    except (StrnError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
