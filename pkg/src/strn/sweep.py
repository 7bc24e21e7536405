"""One-parameter-at-a-time tuning sweeps over a problem collection.

All solver parameters stay at their defaults except the swept one; every
(problem, starting point, value) triple is solved once and reported as a
:class:`SweepRecord`.  Emitters turn the records into CSV, markdown iteration
tables and performance-profile data.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import InvalidParameters, InvalidSweep, MixedSweep, UnknownProblem
from .problem import ProblemDefinition
from .solver import SolverParameters, TerminationReason, solve, solve_with_variable_theta
from . import suite

SWEEPABLE = ("alpha1", "alpha2", "beta1", "beta2", "beta3", "theta", "gamma")

# reference value grids for the tuning sweeps; beta2 and gamma were not
# tabulated with the others, so their grids bracket the commonly recommended values
REFERENCE_GRIDS: Dict[str, Tuple[float, ...]] = {
    "alpha1": (0.2, 0.3, 0.4, 0.5, 0.6, 0.7),
    "alpha2": (0.3, 0.4, 0.45, 0.5, 0.6, 0.7),
    "beta1": (0.05, 0.1, 0.15, 0.2, 0.25),
    "beta2": (0.1, 0.15, 0.2, 0.25, 0.3, 0.35),
    "beta3": (0.6, 0.7, 0.75, 0.8, 0.85),
    "theta": (0.6, 0.7, 0.8, 0.9, 0.95, 0.99995),
    "gamma": (2.0, 4.0, 6.0, 8.0, 10.0),
}
INFERRED_GRIDS = ("beta2", "gamma")

PROFILE_TAUS = (1.0, 1.25, 1.5, 2.0, 4.0, 8.0, math.inf)

CSV_HEADER = (
    "problem", "start_index", "parameter", "value", "iterations", "residual_evals",
    "jacobian_evals", "final_residual_norm", "termination_code", "elapsed_ms",
)


def default_grid(parameter: str, base: Optional[SolverParameters] = None) -> Tuple[float, ...]:
    """The reference grid, minus values the base parameters cannot accept.

    Only alpha1 is affected: values above the base alpha2 break alpha1 <= alpha2.
    Such values would act exactly like alpha1 = alpha2 anyway, since the shrink
    rule min(alpha1 * delta, alpha2 * ||D s||) always picks the second term
    once alpha1 >= alpha2 (||D s|| <= delta).
    """
    if parameter not in REFERENCE_GRIDS:
        raise InvalidSweep(f"unknown sweep parameter {parameter!r}; choose from {', '.join(SWEEPABLE)}")
    base = base or SolverParameters()
    grid = REFERENCE_GRIDS[parameter]
    if parameter == "alpha1":
        grid = tuple(v for v in grid if v <= base.alpha2)
    return grid


@dataclass
class SweepSpecification:
    parameter: str
    values: Optional[Sequence[float]] = None  # None means default_grid(parameter, base)
    problems: Optional[Sequence[str]] = None  # None means the whole built-in suite
    start_indices: Union[str, Sequence[int]] = "all"
    base: SolverParameters = field(default_factory=SolverParameters)
    variable_theta: bool = False


@dataclass
class SweepRecord:
    problem: str
    start_index: int
    parameter: str
    value: float
    iterations: int
    residual_evals: int
    jacobian_evals: int
    final_residual_norm: float
    termination_code: int
    elapsed_ms: float

    @property
    def converged(self) -> bool:
        return self.termination_code == TerminationReason.CONVERGED


@dataclass
class SensitivityReport:
    parameter: str
    pairs: Dict[Tuple[str, int], bool]
    problems: Dict[str, bool]

    @property
    def n_sensitive(self) -> int:
        return sum(self.problems.values())

    @property
    def n_insensitive(self) -> int:
        return len(self.problems) - self.n_sensitive


def _resolve_problems(spec: SweepSpecification, catalog: Optional[Dict[str, ProblemDefinition]]):
    if catalog is None:
        catalog = suite.registry()
        if spec.problems is None:
            return list(catalog.values())
        return [suite.get_problem(name) for name in spec.problems]
    if spec.problems is None:
        return list(catalog.values())
    missing = [name for name in spec.problems if name not in catalog]
    if missing:
        raise UnknownProblem(missing[0])
    return [catalog[name] for name in spec.problems]


def _validated_params(spec: SweepSpecification) -> List[Tuple[float, SolverParameters]]:
    if spec.parameter not in SWEEPABLE:
        raise InvalidSweep(f"unknown sweep parameter {spec.parameter!r}; choose from {', '.join(SWEEPABLE)}")
    if spec.variable_theta and spec.parameter == "theta":
        raise InvalidSweep("a theta sweep cannot run in variable-theta mode")
    values = default_grid(spec.parameter, spec.base) if spec.values is None else tuple(spec.values)
    if not values:
        raise InvalidSweep("empty value grid")
    out = []
    for v in values:
        try:
            out.append((float(v), replace(spec.base, **{spec.parameter: float(v)})))
        except InvalidParameters as exc:
            raise InvalidSweep(f"{spec.parameter}={v}: {exc}") from exc
    return out


def _run_one(problem: ProblemDefinition, start_index: int, parameter: str, value: float,
             params: SolverParameters, variable_theta: bool) -> SweepRecord:
    x0 = problem.starting_points[start_index]
    t0 = time.perf_counter()
    if variable_theta:
        report = solve_with_variable_theta(problem, x0, params)
    else:
        report = solve(problem, x0, params)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return SweepRecord(
        problem=problem.name, start_index=start_index, parameter=parameter, value=value,
        iterations=report.iterations, residual_evals=report.residual_evals,
        jacobian_evals=report.jacobian_evals, final_residual_norm=report.final_residual_norm,
        termination_code=int(report.reason), elapsed_ms=elapsed,
    )


def run_sweep(spec: SweepSpecification, workers: int = 1,
              catalog: Optional[Dict[str, ProblemDefinition]] = None) -> List[SweepRecord]:
    """Solve every (problem, start, value) triple of the sweep.

    Records come back ordered by problem order, start index and grid position,
    independent of ``workers``.  ``catalog`` replaces the built-in suite as the
    source of problems.
    """
    grid = _validated_params(spec)
    problems = _resolve_problems(spec, catalog)
    jobs = []
    for p_pos, problem in enumerate(problems):
        if spec.start_indices == "all":
            starts = range(len(problem.starting_points))
        else:
            starts = list(spec.start_indices)
            bad = [i for i in starts if not 0 <= i < len(problem.starting_points)]
            if bad:
                raise InvalidSweep(f"{problem.name} has no starting point {bad[0]}")
        for s in starts:
            for v_pos, (value, params) in enumerate(grid):
                jobs.append(((p_pos, s, v_pos), (problem, s, spec.parameter, value, params, spec.variable_theta)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(key, pool.submit(_run_one, *args)) for key, args in jobs]
            results = [(key, fut.result()) for key, fut in futures]
    else:
        results = [(key, _run_one(*args)) for key, args in jobs]
    results.sort(key=lambda item: item[0])
    return [rec for _, rec in results]


def _single_parameter(records: Sequence[SweepRecord]) -> str:
    params = {r.parameter for r in records}
    if len(params) > 1:
        raise MixedSweep(f"records span several parameters: {', '.join(sorted(params))}")
    return params.pop() if params else ""


def _grid_values(records: Sequence[SweepRecord]) -> List[float]:
    values = []
    for r in records:
        if r.value not in values:
            values.append(r.value)
    return values


def _pairs(records: Sequence[SweepRecord]) -> Dict[Tuple[str, int], List[SweepRecord]]:
    pairs: Dict[Tuple[str, int], List[SweepRecord]] = {}
    for r in records:
        pairs.setdefault((r.problem, r.start_index), []).append(r)
    return pairs


def sensitivity(records: Sequence[SweepRecord]) -> SensitivityReport:
    """A (problem, start) pair is sensitive when iteration counts or termination codes differ across the grid."""
    parameter = _single_parameter(records)
    pairs = {}
    problems: Dict[str, bool] = {}
    for key, rows in _pairs(records).items():
        flag = len({(r.iterations, r.termination_code) for r in rows}) > 1
        pairs[key] = flag
        problems[key[0]] = problems.get(key[0], False) or flag
    return SensitivityReport(parameter=parameter, pairs=pairs, problems=problems)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def emit_csv(records: Sequence[SweepRecord], destination=None, zero_elapsed: bool = False) -> bytes:
    """RFC 4180 CSV of the records; written to ``destination`` (path or binary file) when given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([
            r.problem, r.start_index, r.parameter, _fmt_float(r.value), r.iterations,
            r.residual_evals, r.jacobian_evals, _fmt_float(r.final_residual_norm),
            r.termination_code, 0 if zero_elapsed else _fmt_float(r.elapsed_ms),
        ])
    data = buf.getvalue().encode("utf-8")
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(data)
        else:
            with open(destination, "wb") as fh:
                fh.write(data)
    return data


def read_csv(source) -> List[SweepRecord]:
    if hasattr(source, "read"):
        text = source.read()
        text = text.decode("utf-8") if isinstance(text, bytes) else text
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text, newline="")))
    return [
        SweepRecord(
            problem=row["problem"], start_index=int(row["start_index"]), parameter=row["parameter"],
            value=float(row["value"]), iterations=int(row["iterations"]),
            residual_evals=int(row["residual_evals"]), jacobian_evals=int(row["jacobian_evals"]),
            final_residual_norm=float(row["final_residual_norm"]),
            termination_code=int(row["termination_code"]), elapsed_ms=float(row["elapsed_ms"]),
        )
        for row in rows
    ]


_ORDINALS = ("First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth", "Tenth")


def _start_label(i: int) -> str:
    return f"{_ORDINALS[i]} x0" if i < len(_ORDINALS) else f"x0 #{i + 1}"


def _value_label(v: float) -> str:
    return f"{v:g}" if abs(v - round(v, 6)) < 1e-12 else repr(v)


def emit_iteration_table(records: Sequence[SweepRecord], include_all: bool = False) -> str:
    """Markdown iteration tables, one block per starting point.

    Cells hold iteration counts, or "-" when the run did not converge.  By
    default only sensitive (problem, start) rows are shown.
    """
    parameter = _single_parameter(records)
    values = _grid_values(records)
    flags = sensitivity(records).pairs if records else {}
    pairs = _pairs(records)
    starts = sorted({s for _, s in pairs})
    header = "| Problem | " + " | ".join(f"{parameter}={_value_label(v)}" for v in values) + " |"
    rule = "|---|" + "---|" * len(values)
    lines = [f"## Iterations for the selected values of {parameter}", ""]
    if not starts:
        lines += ["_No records._", ""]
    for s in starts:
        rows = []
        for (name, start), recs in pairs.items():
            if start != s or not (include_all or flags[(name, start)]):
                continue
            by_value = {r.value: r for r in recs}
            cells = [str(by_value[v].iterations) if v in by_value and by_value[v].converged else "-" for v in values]
            rows.append(f"| {name} | " + " | ".join(cells) + " |")
        lines += [f"### {_start_label(s)}", "", header, rule]
        lines += rows
        if not rows:
            lines.append("")
            lines.append("_No sensitive problems for this starting point._")
        lines.append("")
    return "\n".join(lines)


def performance_ratios(records: Sequence[SweepRecord]) -> Dict[Tuple[str, int, float], float]:
    """Iterations over the best converged iterations across the grid, per (problem, start).

    Failed runs get an infinite ratio.  Counts are floored at one iteration so
    a start that is already a root gives ratio 1 instead of 0/0.
    """
    ratios = {}
    for (name, start), recs in _pairs(records).items():
        ok = [max(r.iterations, 1) for r in recs if r.converged]
        best = min(ok) if ok else None
        for r in recs:
            ratios[(name, start, r.value)] = max(r.iterations, 1) / best if r.converged else math.inf
    return ratios


def profile_curve(records: Sequence[SweepRecord], taus: Sequence[float] = PROFILE_TAUS) -> Dict[float, List[float]]:
    """Fraction of (problem, start) pairs with ratio <= tau, per grid value."""
    ratios = performance_ratios(records)
    n_pairs = len(_pairs(records))
    curve = {}
    for v in _grid_values(records):
        rs = [ratio for (_, _, value), ratio in ratios.items() if value == v]
        curve[v] = [sum(1 for ratio in rs if ratio <= tau and ratio < math.inf) / n_pairs for tau in taus]
    return curve


def _fmt_tsv(v: float) -> str:
    return "inf" if v == math.inf else repr(float(v))


def emit_profile_data(records: Sequence[SweepRecord], taus: Sequence[float] = PROFILE_TAUS) -> str:
    """Tab-separated performance ratios followed by the sampled profile curve."""
    parameter = _single_parameter(records)
    lines = ["# performance ratios", "\t".join(("problem", "start_index", parameter or "value", "ratio"))]
    for (name, start, value), ratio in performance_ratios(records).items():
        lines.append("\t".join((name, str(start), _fmt_tsv(value), _fmt_tsv(ratio))))
    lines += ["", "# profile", "\t".join((parameter or "value", "tau", "rho"))]
    for value, rhos in profile_curve(records, taus).items():
        for tau, rho in zip(taus, rhos):
            lines.append("\t".join((_fmt_tsv(value), _fmt_tsv(tau), _fmt_tsv(rho))))
    return "\n".join(lines) + "\n"
