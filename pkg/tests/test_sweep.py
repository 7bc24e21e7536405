import io
import json
import math
import os

import pytest
from hypothesis import given, strategies as st

from strn.errors import InvalidSweep, MixedSweep
from strn.solver import SolverParameters
from strn.sweep import (
    CSV_HEADER,
    REFERENCE_GRIDS,
    SweepRecord,
    SweepSpecification,
    default_grid,
    emit_csv,
    emit_iteration_table,
    emit_profile_data,
    performance_ratios,
    profile_curve,
    read_csv,
    run_sweep,
    sensitivity,
)

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def rec(problem, start, value, iterations, code=0, parameter="gamma"):
    return SweepRecord(problem=problem, start_index=start, parameter=parameter, value=value,
                       iterations=iterations, residual_evals=iterations + 1, jacobian_evals=iterations,
                       final_residual_norm=0.0 if code == 0 else 1.0, termination_code=code, elapsed_ms=0.0)


def test_cardinality():
    spec = SweepSpecification("alpha1", values=[0.2, 0.3], problems=["affine_box", "rosenbrock_system"],
                              start_indices=[0])
    records = run_sweep(spec)
    assert len(records) == 4
    assert [(r.problem, r.value) for r in records] == [
        ("affine_box", 0.2), ("affine_box", 0.3), ("rosenbrock_system", 0.2), ("rosenbrock_system", 0.3)]


def test_alpha1_above_alpha2_rejected():
    with pytest.raises(InvalidSweep):
        run_sweep(SweepSpecification("alpha1", values=[0.2, 0.6], problems=["affine_box"]))


def test_default_alpha1_grid_respects_alpha2():
    assert default_grid("alpha1") == (0.2, 0.3, 0.4, 0.5)
    assert default_grid("alpha1", SolverParameters(alpha1=0.25, alpha2=0.7)) == REFERENCE_GRIDS["alpha1"]


@pytest.mark.parametrize("spec", [
    SweepSpecification("theta", variable_theta=True),
    SweepSpecification("delta0"),
    SweepSpecification("gamma", values=[]),
    SweepSpecification("gamma", values=[0.5]),
    SweepSpecification("gamma", problems=["affine_box"], start_indices=[5]),
])
def test_invalid_sweeps(spec):
    with pytest.raises(InvalidSweep):
        run_sweep(spec)


def test_theta_inert_on_unbounded_problems():
    names = ["rosenbrock_system", "singular_jacobian_case", "rank_deficient_linear"]
    records = run_sweep(SweepSpecification("theta", problems=names))
    report = sensitivity(records)
    assert not any(report.problems.values())


def test_affine_box_insensitive_everywhere():
    for parameter in REFERENCE_GRIDS:
        report = sensitivity(run_sweep(SweepSpecification(parameter, problems=["affine_box"])))
        assert report.problems == {"affine_box": False}


def test_sensitivity_definition():
    same = [rec("a", 0, v, 5) for v in (2.0, 4.0)]
    assert sensitivity(same).n_sensitive == 0
    diverging = [rec("a", 0, 2.0, 5), rec("a", 0, 4.0, 5, code=1)]
    assert sensitivity(diverging).n_sensitive == 1
    with pytest.raises(MixedSweep):
        sensitivity([rec("a", 0, 2.0, 5), rec("a", 0, 0.3, 5, parameter="beta1")])


def test_csv_shape_and_round_trip():
    assert emit_csv([]) == (",".join(CSV_HEADER) + "\r\n").encode()
    records = [rec("a", 0, 2.0, 5), rec("a", 0, 4.0, 7), rec("b, quoted", 1, 2.0, 3), rec("b, quoted", 1, 4.0, 3)]
    data = emit_csv(records)
    assert data.count(b"\r\n") == 5
    assert b'"b, quoted"' in data
    assert read_csv(io.BytesIO(data)) == records


def test_csv_deterministic_and_parallel_equal_serial(tmp_path):
    spec = SweepSpecification("beta3", problems=["himmelblau_system", "boundary_root", "powell_badly_scaled"])
    a = emit_csv(run_sweep(spec), zero_elapsed=True)
    b = emit_csv(run_sweep(spec), zero_elapsed=True)
    c = emit_csv(run_sweep(spec, workers=4), tmp_path / "out.csv", zero_elapsed=True)
    assert a == b == c == (tmp_path / "out.csv").read_bytes()


def test_golden_sweeps_reproduce_bytes():
    with open(os.path.join(GOLDEN, "manifest.json"), encoding="utf-8") as fh:
        spec = json.load(fh)
    for sweep in spec["sweeps"]:
        records = run_sweep(SweepSpecification(sweep["parameter"], values=sweep["values"],
                                               problems=spec["problems"]))
        with open(os.path.join(GOLDEN, sweep["csv"]), "rb") as fh:
            assert emit_csv(records, zero_elapsed=True) == fh.read(), sweep["csv"]


def test_table_marks_failures():
    records = [rec("a", 0, 2.0, 5), rec("a", 0, 4.0, 1000, code=1)]
    table = emit_iteration_table(records)
    assert "### First x0" in table
    assert "| a | 5 | - |" in table
    assert "gamma=2 | gamma=4" in table


def test_table_insensitive_only_has_note():
    records = [rec("a", 0, v, 5) for v in (2.0, 4.0)]
    table = emit_iteration_table(records)
    assert "| a |" not in table
    assert "_No sensitive problems for this starting point._" in table
    assert "| a | 5 | 5 |" in emit_iteration_table(records, include_all=True)


def test_profile_single_value():
    records = [rec("a", 0, 2.0, 5), rec("b", 0, 2.0, 9), rec("c", 0, 2.0, 9, code=3)]
    assert set(performance_ratios(records).values()) == {1.0, math.inf}
    curve = profile_curve(records)
    assert curve[2.0][0] == pytest.approx(2 / 3)


def test_profile_failing_value_is_zero():
    records = [rec("a", 0, 2.0, 5), rec("a", 0, 4.0, 5, code=1), rec("b", 0, 2.0, 3), rec("b", 0, 4.0, 3, code=1)]
    assert profile_curve(records)[4.0] == [0.0] * 7


def test_profile_dominance():
    records = []
    for name, (ia, ib) in {"a": (5, 7), "b": (4, 4), "c": (10, 30), "d": (3, 6)}.items():
        records += [rec(name, 0, 2.0, ia), rec(name, 0, 4.0, ib)]
    curve = profile_curve(records)
    assert all(x >= y for x, y in zip(curve[2.0], curve[4.0]))
    text = emit_profile_data(records)
    assert text.startswith("# performance ratios\nproblem\tstart_index\tgamma\tratio\n")
    assert "c\t0\t4.0\t3.0" in text and "# profile" in text


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2), st.integers(0, 40), st.booleans()),
                min_size=1, max_size=30))
def test_profile_monotone_in_tau(rows):
    records = [rec(f"p{p}", 0, [2.0, 4.0, 6.0][v], n, code=0 if ok else 1) for p, v, n, ok in rows]
    # keep one record per (problem, value)
    records = list({(r.problem, r.value): r for r in records}.values())
    for rhos in profile_curve(records).values():
        assert all(a <= b for a, b in zip(rhos, rhos[1:]))
        assert all(0.0 <= r <= 1.0 for r in rhos)
