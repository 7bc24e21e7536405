import glob
import math
import os
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ReferenceError_, random_expression, reference_evaluate
from strn.dsl import evaluate_ast, load_problem_file, parse_expression, parse_problem_file, serialize_problem
from strn.errors import (
    DSLError,
    ExpressionSyntaxError,
    FormatError,
    NonFiniteEvaluation,
    UnknownIdentifier,
    VariableIndexOutOfRange,
)
from strn.problem import evaluate_residual
from strn.suite import registry

MALFORMED = sorted(glob.glob(os.path.join(os.path.dirname(__file__), "data", "malformed", "*.nls")))


def ev(text, x, n=None):
    return evaluate_ast(parse_expression(text, n or max(len(x), 1)), np.asarray(x, dtype=float))


def test_expression_examples():
    assert ev("x1^2 + x2 - 1", [1.0, 1.0]) == 1.0
    assert ev("2*x1^3", [2.0]) == 16.0
    assert ev("exp(0)", [0.0]) == 1.0
    assert ev("sqrt(x1^2+x2^2)", [3.0, 4.0]) == 5.0


@pytest.mark.parametrize("text, value", [
    ("-x1^2", -4.0),
    ("2^3^2", 512.0),
    ("(2^3)^2", 64.0),
    ("8/4/2", 1.0),
    ("1-2-3", -4.0),
    ("2^-1", 0.5),
    ("-2*-x1", 4.0),
    ("abs(-x1) + 1.5e1", 17.0),
    ("  x1   *.5 ", 1.0),
])
def test_precedence_and_associativity(text, value):
    assert ev(text, [2.0]) == value


def test_variable_index_out_of_range():
    with pytest.raises(VariableIndexOutOfRange) as exc:
        parse_expression("x1 + x3", 2)
    assert exc.value.column == 6


def test_domain_errors():
    with pytest.raises(NonFiniteEvaluation):
        ev("log(x1)", [-1.0])
    with pytest.raises(NonFiniteEvaluation):
        ev("1/x1", [0.0])
    with pytest.raises(NonFiniteEvaluation):
        ev("exp(x1)", [1000.0])
    with pytest.raises(NonFiniteEvaluation):
        ev("(0/x1)^0", [0.0])


@pytest.mark.parametrize("text, cls, column", [
    ("x1 +", ExpressionSyntaxError, 5),
    ("foo(x1)", UnknownIdentifier, 1),
    ("x1 ** 2", ExpressionSyntaxError, 5),
    ("(x1", ExpressionSyntaxError, 4),
])
def test_error_locations(text, cls, column):
    with pytest.raises(cls) as exc:
        parse_expression(text, 1, line=7)
    assert exc.value.line == 7 and exc.value.column == column
    assert str(exc.value).startswith(f"line 7, column {column}:")


GOOD_FILE = """\
# two circles
name circles
vars 2
eq x1^2 + x2^2 - 4
eq (x1 - 1)^2 + x2^2 - 4
lower 0 0
upper 10 10
start 1 1
"""


def test_problem_file_structure():
    p = parse_problem_file(GOOD_FILE)
    assert p.name == "circles" and p.dimension == 2 and len(p.starting_points) == 1
    F = evaluate_residual(p, [0.5, math.sqrt(3.75)])
    np.testing.assert_allclose(F, [0.0, 0.0], atol=1e-14)


def test_problem_file_default_bounds():
    p = parse_problem_file("name a\nvars 1\neq x1 - 2\nstart 0\n")
    assert p.bounds.is_unbounded


def test_start_on_bound_reports_line():
    with pytest.raises(FormatError) as exc:
        parse_problem_file(GOOD_FILE.replace("start 1 1", "start 0 1"))
    assert exc.value.line == 8


@pytest.mark.parametrize("path", MALFORMED, ids=[os.path.basename(p) for p in MALFORMED])
def test_malformed_corpus_gives_structured_errors(path):
    with pytest.raises(DSLError):
        load_problem_file(path)


def test_malformed_corpus_present():
    assert len(MALFORMED) >= 40


@pytest.mark.parametrize("name", sorted(registry()))
def test_round_trip_matches_builtin(name):
    original = registry()[name]
    copy = parse_problem_file(serialize_problem(original))
    assert copy.dimension == original.dimension
    np.testing.assert_array_equal(copy.bounds.lower, original.bounds.lower)
    np.testing.assert_array_equal(copy.bounds.upper, original.bounds.upper)
    for a, b in zip(copy.starting_points, original.starting_points):
        np.testing.assert_array_equal(a, b)
    rng = np.random.default_rng(7)
    lo = np.where(np.isfinite(original.bounds.lower), original.bounds.lower, -3.0)
    hi = np.where(np.isfinite(original.bounds.upper), original.bounds.upper, 3.0)
    for _ in range(50):
        x = lo + rng.uniform(0.01, 0.99, original.dimension) * (hi - lo)
        np.testing.assert_allclose(copy.residual(x), original.residual(x), rtol=1e-12, atol=1e-12)


def test_reference_evaluator_agrees_on_seeded_expressions():
    rng = random.Random(20261015)
    for _ in range(300):
        text = random_expression(rng, 3)
        x = [rng.uniform(-2, 2) for _ in range(3)]
        try:
            expected = reference_evaluate(text, x)
        except ReferenceError_:
            with pytest.raises(NonFiniteEvaluation):
                ev(text, x, 3)
            continue
        assert ev(text, x, 3) == pytest.approx(expected, rel=1e-12, abs=1e-300)


@given(st.text(alphabet="x1234567890.eE+-*/^() \tsqrtexplogabcos,#$", max_size=60))
def test_parser_is_total_on_noise(text):
    try:
        ast = parse_expression(text, 3)
    except DSLError:
        return
    try:
        value = evaluate_ast(ast, np.array([0.5, -1.5, 2.0]))
    except NonFiniteEvaluation:
        return
    assert math.isfinite(value)


@given(st.text(max_size=200))
def test_file_parser_is_total_on_arbitrary_text(text):
    try:
        parse_problem_file(text)
    except DSLError:
        pass
