"""Scaled trust-region Newton solver for F(x) = 0 on a box.

Every iterate stays strictly inside the box.  Each outer iteration linearizes
F, builds the affine scaling D, and then repeatedly computes a dogleg step,
truncates it at the boundary, falls back to the Cauchy step when the dogleg
step is not accurate enough, and shrinks the radius until the actual merit
reduction agrees with the model.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import (
    DegenerateModel,
    InvalidParameters,
    InvalidStartingPoint,
    NonFiniteEvaluation,
    NonPositivePredictedDecrease,
    ScalingFailure,
    SingularJacobian,
    ZeroCauchyDecrease,
)
from .problem import EvaluationCounter, ProblemDefinition, evaluate_jacobian, evaluate_residual
from .scaling import compute_scaling, scaled_gradient_norm
from .trial_step import (
    ModelContext,
    StepKind,
    cauchy_point,
    dogleg_step,
    model_value,
    newton_step,
    rho_c,
    rho_f,
    step_to_boundary,
    truncate_step,
)

# consecutive singular-Jacobian iterations tolerated without real progress
SINGULAR_STREAK_LIMIT = 5
# "real progress" over such a streak means ||F|| fell below this fraction
SINGULAR_STREAK_PROGRESS = 0.9

THETA_CAP = 0.99995


class TerminationReason(enum.IntEnum):
    CONVERGED = 0
    MAX_ITERATIONS = 1
    MAX_EVALUATIONS = 2
    TRUST_REGION_TOO_SMALL = 3
    STAGNATED_RESIDUAL = 4
    SMALL_SCALED_GRADIENT = 5
    SCALING_FAILURE = 6

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))


@dataclass(frozen=True)
class SolverParameters:
    delta0: float = 1.0
    theta: float = 0.99995
    alpha1: float = 0.25
    alpha2: float = 0.5
    beta1: float = 0.1
    beta2: float = 0.25
    beta3: float = 0.75
    gamma: float = 2.0
    max_iterations: int = 1000
    max_residual_evals: int = 2000
    residual_tol: float = 1e-8
    min_delta: float = 1e-8
    stagnation_tol: float = 1e-14
    scaled_grad_tol: float = 1e-14

    def __post_init__(self):
        problems = []
        if not self.delta0 > 0:
            problems.append(f"delta0={self.delta0} must be > 0")
        if not 0 < self.theta < 1:
            problems.append(f"theta={self.theta} must lie in (0, 1)")
        if not 0 < self.alpha1 <= self.alpha2 < 1:
            problems.append(f"need 0 < alpha1 <= alpha2 < 1, got alpha1={self.alpha1}, alpha2={self.alpha2}")
        if not 0 < self.beta1 <= 1:
            problems.append(f"beta1={self.beta1} must lie in (0, 1]")
        if not 0 < self.beta2 < self.beta3 < 1:
            problems.append(f"need 0 < beta2 < beta3 < 1, got beta2={self.beta2}, beta3={self.beta3}")
        if not self.gamma > 1:
            problems.append(f"gamma={self.gamma} must be > 1")
        if self.max_iterations < 0 or self.max_residual_evals < 1:
            problems.append("iteration and evaluation limits must be non-negative")
        for name in ("residual_tol", "min_delta", "stagnation_tol", "scaled_grad_tol"):
            if not getattr(self, name) >= 0:
                problems.append(f"{name} must be >= 0")
        if problems:
            raise InvalidParameters("; ".join(problems))


@dataclass
class IterationRecord:
    """One accepted step.

    ``x`` and ``residual_norm`` describe the new iterate.  ``delta_start`` is
    the radius on entry to the iteration, ``delta_before`` the radius the
    accepted step was computed with (the stashed value restored on
    acceptance) and ``delta_after`` the radius handed to the next iteration.
    """

    k: int
    x: np.ndarray
    residual_norm: float
    delta_start: float
    delta_before: float
    delta_after: float
    step_kind: StepKind
    rho_c: float
    rho_f: float
    inner_rejections: int
    scaled_step_norm: float
    enlarged: bool
    newton_available: bool


@dataclass
class AttemptSummary:
    theta: float
    iterations: int
    residual_evals: int
    jacobian_evals: int
    reason: TerminationReason
    final_residual_norm: float


@dataclass
class SolveReport:
    final_x: np.ndarray
    final_residual_norm: float
    iterations: int
    residual_evals: int
    jacobian_evals: int
    reason: TerminationReason
    attempts: List[AttemptSummary] = field(default_factory=list)
    trace: Optional[List[IterationRecord]] = None

    @property
    def converged(self) -> bool:
        return self.reason is TerminationReason.CONVERGED

    def to_dict(self) -> dict:
        out = {
            "final_x": self.final_x.tolist(),
            "final_residual_norm": self.final_residual_norm,
            "iterations": self.iterations,
            "residual_evals": self.residual_evals,
            "jacobian_evals": self.jacobian_evals,
            "termination_code": int(self.reason),
            "reason": self.reason.label,
            "attempts": [dict(asdict(a), reason=a.reason.label) for a in self.attempts],
        }
        if self.trace is not None:
            out["trace"] = [
                dict(asdict(r), x=r.x.tolist(), step_kind=r.step_kind.value) for r in self.trace
            ]
        return out


def _interior_point(x, step, bounds):
    """x + step, pulled one ulp back inside wherever rounding lands on a bound."""
    y = x + step
    hit_low = y <= bounds.lower
    hit_up = y >= bounds.upper
    if np.any(hit_low) or np.any(hit_up):
        y = y.copy()
        y[hit_low] = np.nextafter(bounds.lower[hit_low], np.inf)
        y[hit_up] = np.nextafter(bounds.upper[hit_up], -np.inf)
    return y


def solve(problem: ProblemDefinition, x0, params: Optional[SolverParameters] = None,
          trace: bool = False) -> SolveReport:
    params = params or SolverParameters()
    bounds = problem.bounds
    x = np.array(x0, dtype=float).reshape(-1)
    if x.size != problem.dimension:
        raise InvalidStartingPoint(f"starting point has length {x.size}, expected {problem.dimension}")
    if not bounds.is_interior(x):
        raise InvalidStartingPoint(f"starting point {x.tolist()} is not strictly inside the box")

    counter = EvaluationCounter()
    F = evaluate_residual(problem, x, counter)
    F_norm = float(np.linalg.norm(F))
    delta = params.delta0
    records: Optional[List[IterationRecord]] = [] if trace else None
    k = 0
    singular_streak = 0
    streak_start_norm = F_norm
    reason = None

    while reason is None:
        if F_norm <= params.residual_tol:
            reason = TerminationReason.CONVERGED
            break
        if k >= params.max_iterations:
            reason = TerminationReason.MAX_ITERATIONS
            break
        if counter.residual_evals >= params.max_residual_evals:
            reason = TerminationReason.MAX_EVALUATIONS
            break

        # F' is needed before D because D depends on grad f = F'^T F
        J = evaluate_jacobian(problem, x, F, counter)
        ctx = ModelContext.from_linearization(F, J)
        try:
            scaling = compute_scaling(x, ctx.grad, bounds)
        except ScalingFailure:
            reason = TerminationReason.SCALING_FAILURE
            break
        if scaled_gradient_norm(scaling, ctx.grad) < params.scaled_grad_tol:
            reason = TerminationReason.SMALL_SCALED_GRADIENT
            break
        try:
            p_newton = newton_step(ctx)
        except SingularJacobian:
            p_newton = None

        delta_start = delta
        rejections = 0
        while True:
            try:
                step = dogleg_step(ctx, scaling, p_newton, delta)
                p_c, _ = cauchy_point(ctx, scaling, delta)
            except DegenerateModel:
                reason = TerminationReason.STAGNATED_RESIDUAL
                break
            kind = step.kind
            alpha_p = truncate_step(step.p, step_to_boundary(x, step.p, bounds), params.theta)
            alpha_pc = truncate_step(p_c, step_to_boundary(x, p_c, bounds), params.theta)
            try:
                ratio_c = rho_c(ctx, alpha_p, alpha_pc)
            except ZeroCauchyDecrease:
                reason = TerminationReason.SMALL_SCALED_GRADIENT
                break
            if ratio_c < params.beta1:
                alpha_p = alpha_pc
                kind = StepKind.CAUCHY_FALLBACK

            trial = _interior_point(x, alpha_p, bounds)
            alpha_p = trial - x
            scaled_len = float(np.linalg.norm(scaling.d * alpha_p))
            delta_star = delta
            delta = min(params.alpha1 * delta, params.alpha2 * scaled_len)

            ratio_f = -math.inf
            F_trial = None
            predicted = ctx.f - model_value(ctx, alpha_p)
            if predicted > 0.0:
                if counter.residual_evals >= params.max_residual_evals:
                    delta = delta_star
                    reason = TerminationReason.MAX_EVALUATIONS
                    break
                try:
                    F_trial = evaluate_residual(problem, trial, counter)
                    ratio_f = rho_f(ctx.f, 0.5 * float(F_trial @ F_trial), predicted)
                except (NonFiniteEvaluation, NonPositivePredictedDecrease):
                    ratio_f = -math.inf
            if ratio_f >= params.beta2:
                break
            rejections += 1
            if delta < params.min_delta:
                reason = TerminationReason.TRUST_REGION_TOO_SMALL
                break
        if reason is not None:
            break

        delta = delta_star
        enlarged = ratio_f >= params.beta3
        if enlarged:
            delta = max(delta, params.gamma * scaled_len)
        F_prev, F_prev_norm = F, F_norm
        x, F = trial, F_trial
        F_norm = float(np.linalg.norm(F))
        k += 1
        if records is not None:
            records.append(IterationRecord(
                k=k, x=x.copy(), residual_norm=F_norm,
                delta_start=delta_start, delta_before=delta_star, delta_after=delta,
                step_kind=kind, rho_c=ratio_c, rho_f=ratio_f, inner_rejections=rejections,
                scaled_step_norm=scaled_len, enlarged=enlarged, newton_available=p_newton is not None,
            ))
        if F_norm <= params.residual_tol:
            continue
        if np.linalg.norm(F - F_prev) <= params.stagnation_tol * F_prev_norm:
            reason = TerminationReason.STAGNATED_RESIDUAL
            break
        if p_newton is None:
            if singular_streak == 0:
                streak_start_norm = F_prev_norm
            singular_streak += 1
            if singular_streak >= SINGULAR_STREAK_LIMIT:
                if F_norm > SINGULAR_STREAK_PROGRESS * streak_start_norm:
                    reason = TerminationReason.STAGNATED_RESIDUAL
                    break
                singular_streak = 0
        else:
            singular_streak = 0

    summary = AttemptSummary(
        theta=params.theta, iterations=k, residual_evals=counter.residual_evals,
        jacobian_evals=counter.jacobian_evals, reason=reason, final_residual_norm=F_norm,
    )
    return SolveReport(
        final_x=x, final_residual_norm=F_norm, iterations=k,
        residual_evals=counter.residual_evals, jacobian_evals=counter.jacobian_evals,
        reason=reason, attempts=[summary], trace=records,
    )


def theta_schedule() -> List[float]:
    """Truncation parameters 0.7, 0.725, ..., 1.0 with the last one capped below 1."""
    return [min(round(0.7 + 0.025 * i, 10), THETA_CAP) for i in range(13)]


def solve_with_variable_theta(problem: ProblemDefinition, x0, params: Optional[SolverParameters] = None,
                              trace: bool = False) -> SolveReport:
    """Restart from x0 with each theta of the schedule until one attempt converges.

    Returns the first converged report, or the attempt with the smallest final
    residual if none converges.  Evaluation counts are cumulative over
    attempts; the iteration count is that of the returned attempt.
    """
    params = params or SolverParameters()
    attempts: List[AttemptSummary] = []
    best = None
    residual_evals = jacobian_evals = 0
    for theta in theta_schedule():
        report = solve(problem, x0, replace(params, theta=theta), trace=trace)
        attempts.extend(report.attempts)
        residual_evals += report.residual_evals
        jacobian_evals += report.jacobian_evals
        if best is None or report.final_residual_norm < best.final_residual_norm:
            best = report
        if report.converged:
            best = report
            break
    best.attempts = attempts
    best.residual_evals = residual_evals
    best.jacobian_evals = jacobian_evals
    return best
