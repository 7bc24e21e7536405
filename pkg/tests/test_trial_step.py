import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import textbook_dogleg
from strn.errors import NonPositivePredictedDecrease, SingularJacobian, ZeroCauchyDecrease
from strn.problem import Bounds
from strn.scaling import ScalingDiagonal, compute_scaling
from strn.trial_step import (
    ModelContext,
    StepKind,
    cauchy_point,
    dogleg_fraction,
    dogleg_step,
    model_value,
    newton_step,
    rho_c,
    rho_f,
    step_to_boundary,
    truncate_step,
)

I2 = np.eye(2)
IDENTITY = ScalingDiagonal(v=np.ones(2), d=np.ones(2))


def ctx(J, F):
    return ModelContext.from_linearization(F, J)


def test_newton_examples():
    assert newton_step(ctx(I2, [1.0, 2.0])).tolist() == [-1.0, -2.0]
    assert newton_step(ctx(np.diag([2.0, 4.0]), [2.0, 4.0])).tolist() == [-1.0, -1.0]
    with pytest.raises(SingularJacobian):
        newton_step(ctx([[1.0, 1.0], [1.0, 1.0]], [1.0, 0.0]))


def test_model_value_examples():
    c = ctx([[2.0, 1.0], [0.5, 3.0]], [1.0, -2.0])
    assert model_value(c, [0.0, 0.0]) == c.f
    assert model_value(c, newton_step(c)) == pytest.approx(0.0, abs=1e-28)
    assert model_value(ctx(I2, [1.0, 0.0]), [-0.5, 0.0]) == 0.125


def test_newton_inside():
    c = ctx(I2, [0.5, 0.0])
    step = dogleg_step(c, IDENTITY, newton_step(c), 1.0)
    assert step.kind is StepKind.NEWTON_INSIDE
    assert step.p.tolist() == [-0.5, 0.0]


def test_dogleg_fraction_hand_case():
    t = dogleg_fraction([0.5, 0.0], [2.0, 0.0], 1.0)
    assert t == pytest.approx(1 / 3, rel=1e-15)


def test_steepest_truncated_at_case_boundary():
    # p_u = -(4/4) * (2, 0) has norm 2 >= 1, so the steepest direction is cut to the radius
    c = ctx(I2, [2.0, 0.0])
    step = dogleg_step(c, IDENTITY, newton_step(c), 1.0)
    assert step.kind is StepKind.SCALED_STEEPEST_TRUNCATED
    assert step.p.tolist() == [-1.0, 0.0]


def test_interpolated_kind():
    J = np.array([[1.0, 0.0], [0.0, 4.0]])
    c = ctx(J, [1.0, 1.0])
    step = dogleg_step(c, IDENTITY, newton_step(c), 0.8)
    assert step.kind is StepKind.DOGLEG_INTERPOLATED
    assert step.scaled_norm == pytest.approx(0.8, rel=1e-14)


def test_cauchy_fallback_without_newton():
    c = ctx([[1.0, 1.0], [2.0, 2.0]], [-1.0, -2.0])
    step = dogleg_step(c, IDENTITY, None, 100.0)
    assert step.kind is StepKind.CAUCHY_FALLBACK
    np.testing.assert_allclose(step.p, [0.5, 0.5], rtol=1e-14)


def test_cauchy_examples():
    c = ctx(I2, [1.0, 0.0])
    p, tau = cauchy_point(c, IDENTITY, 10.0)
    assert tau == 1.0 and p.tolist() == [-1.0, 0.0]
    p, tau = cauchy_point(c, IDENTITY, 0.5)
    assert tau == 0.5 and p.tolist() == [-0.5, 0.0]


def test_step_to_boundary_examples():
    box = Bounds([0.0, 0.0], [1.0, 1.0])
    assert step_to_boundary([0.5, 0.5], [1.0, 0.0], box) == 0.5
    assert step_to_boundary([0.5, 0.5], [1.0, 0.0], Bounds.unbounded(2)) == math.inf
    assert step_to_boundary([0.5, 0.5], [0.0, 0.0], box) == math.inf


def test_truncate_examples():
    p = np.array([0.2, 0.0])
    assert truncate_step(p, 2.0, 0.99995).tolist() == p.tolist()
    np.testing.assert_allclose(truncate_step(p, 0.5, 0.99995), 0.499975 * p, rtol=1e-15)
    q = np.array([2.0, 0.0])
    np.testing.assert_allclose(truncate_step(q, 1.0, 0.9), 0.9 * q, rtol=1e-15)


def test_rho_c_examples():
    c = ctx(I2, [1.0, 0.0])
    a = np.array([-0.3, 0.0])
    assert rho_c(c, a, a) == 1.0
    assert rho_c(c, np.zeros(2), a) == 0.0
    pc = np.array([-(1 - 1 / math.sqrt(2)), 0.0])
    assert rho_c(c, np.array([-1.0, 0.0]), pc) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ZeroCauchyDecrease):
        rho_c(c, a, np.zeros(2))


def test_rho_f_examples():
    assert rho_f(1.0, 0.4, 0.8) == pytest.approx(0.75, rel=1e-15)
    assert rho_f(1.0, 1.0, 0.3) == 0.0
    with pytest.raises(NonPositivePredictedDecrease):
        rho_f(1.0, 0.5, 0.0)


def test_affine_model_is_exact():
    J = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    x = np.array([0.7, 0.2])
    F = J @ x - b
    c = ctx(J, F)
    p = np.array([-0.1, 0.05])
    Fn = J @ (x + p) - b
    assert rho_f(c.f, 0.5 * Fn @ Fn, c.f - model_value(c, p)) == pytest.approx(1.0, rel=1e-12)


def _well_conditioned(rng, n):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(rng.uniform(0.5, 3.0, n)) @ V


@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 10.0))
def test_dogleg_matches_textbook_in_scaled_space(n, seed, delta):
    rng = np.random.default_rng(seed)
    J = _well_conditioned(rng, n)
    F = rng.standard_normal(n)
    lower = rng.uniform(-2, 0, n)
    upper = lower + rng.uniform(0.1, 4, n)
    x = lower + rng.uniform(0.05, 0.95, n) * (upper - lower)
    c = ctx(J, F)
    s = compute_scaling(x, c.grad, Bounds(lower, upper))
    step = dogleg_step(c, s, newton_step(c), delta)
    expected = textbook_dogleg(J / s.d, F, delta)
    np.testing.assert_allclose(s.d * step.p, expected, rtol=1e-8, atol=1e-10 * max(delta, 1.0))
    assert np.linalg.norm(s.d * step.p) <= delta * (1 + 1e-12)


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1), st.floats(0.5, 0.99995))
def test_truncated_steps_stay_interior(n, seed, theta):
    rng = np.random.default_rng(seed)
    lower = rng.uniform(-5, 5, n)
    upper = lower + rng.uniform(1e-3, 10, n)
    x = lower + rng.uniform(0.01, 0.99, n) * (upper - lower)
    p = rng.standard_normal(n) * rng.choice([1e-3, 1.0, 100.0])
    box = Bounds(lower, upper)
    y = x + truncate_step(p, step_to_boundary(x, p, box), theta)
    assert box.is_interior(y)
