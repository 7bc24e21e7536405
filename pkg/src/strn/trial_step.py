"""Trial steps for the elliptical trust-region subproblem

    min_p  m(p) = ||F' p + F||^2 / 2   subject to  ||D p|| <= delta

plus the pieces used to accept or reject them: Cauchy point, distance to the
boundary, theta-truncation and the two ratio tests.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from .errors import (
    DegenerateModel,
    NonPositivePredictedDecrease,
    SingularJacobian,
    ZeroCauchyDecrease,
)
from .problem import Bounds
from .scaling import ScalingDiagonal, apply_D, apply_D_inverse, apply_D_inverse_squared

_EPS = np.finfo(float).eps


class StepKind(str, enum.Enum):
    NEWTON_INSIDE = "NewtonInside"
    SCALED_STEEPEST_TRUNCATED = "ScaledSteepestTruncated"
    DOGLEG_INTERPOLATED = "DoglegInterpolated"
    CAUCHY_FALLBACK = "CauchyFallback"


@dataclass(frozen=True, eq=False)
class TrialStep:
    p: np.ndarray
    kind: StepKind
    scaled_norm: float


@dataclass(frozen=True, eq=False)
class ModelContext:
    """Linearization of F at the current iterate."""

    f: float
    grad: np.ndarray
    jacobian: np.ndarray
    residual: np.ndarray

    @classmethod
    def from_linearization(cls, residual, jacobian) -> "ModelContext":
        F = np.asarray(residual, dtype=float)
        J = np.asarray(jacobian, dtype=float)
        return cls(f=0.5 * float(F @ F), grad=J.T @ F, jacobian=J, residual=F)


def newton_step(ctx: ModelContext) -> np.ndarray:
    """Solve F' p = -F by LU with partial pivoting.

    Raises SingularJacobian if a pivot falls below n * eps * ||F'||_inf or the
    solve leaves a residual above 1e-8 * max(||F||, 1).
    """
    J = ctx.jacobian
    F = ctx.residual
    n = J.shape[0]
    if not np.all(np.isfinite(J)):
        raise SingularJacobian("jacobian has non-finite entries")
    lu, piv, info = lapack.dgetrf(J)
    if info < 0:
        raise SingularJacobian(f"dgetrf failed with info={info}")
    norm_inf = float(np.max(np.sum(np.abs(J), axis=1)))
    pivots = np.abs(np.diag(lu))
    if norm_inf == 0.0 or np.min(pivots) < n * _EPS * norm_inf:
        raise SingularJacobian(f"smallest pivot {np.min(pivots):.3g} relative to ||J||={norm_inf:.3g}")
    p, info = lapack.dgetrs(lu, piv, -F)
    if info != 0 or not np.all(np.isfinite(p)):
        raise SingularJacobian(f"dgetrs failed with info={info}")
    if np.linalg.norm(J @ p + F) > 1e-8 * max(np.linalg.norm(F), 1.0):
        raise SingularJacobian("newton system solved inaccurately")
    return p


def model_value(ctx: ModelContext, p) -> float:
    r = ctx.jacobian @ np.asarray(p, dtype=float) + ctx.residual
    return 0.5 * float(r @ r)


def _steepest_descent_data(ctx: ModelContext, scaling: ScalingDiagonal):
    """Scaled gradient D^-1 g, its squared norm and ||F' D^-2 g||^2."""
    g_hat = apply_D_inverse(scaling, ctx.grad)
    g_hat_sq = float(g_hat @ g_hat)
    Jd = ctx.jacobian @ apply_D_inverse_squared(scaling, ctx.grad)
    curvature = float(Jd @ Jd)
    if curvature == 0.0 or not math.isfinite(curvature):
        raise DegenerateModel("model is flat along the scaled gradient")
    return g_hat, g_hat_sq, curvature


def dogleg_fraction(p_u, p_n, delta: float) -> float:
    """Return t in [0, 1] with ||p_u + t (p_n - p_u)|| = delta.

    Assumes ||p_u|| < delta <= ||p_n||, which gives exactly one root of the
    quadratic in [0, 1]; the formula is chosen per sign of the linear term to
    avoid cancellation.
    """
    p_u = np.asarray(p_u, dtype=float)
    s = np.asarray(p_n, dtype=float) - p_u
    a = float(s @ s)
    b = 2.0 * float(p_u @ s)
    c = float(p_u @ p_u) - delta * delta
    if a == 0.0:
        return 1.0
    disc = math.sqrt(max(b * b - 4.0 * a * c, 0.0))
    if b >= 0.0:
        t = -2.0 * c / (b + disc) if b + disc > 0.0 else 0.0
    else:
        t = (-b + disc) / (2.0 * a)
    return min(max(t, 0.0), 1.0)


def dogleg_step(ctx: ModelContext, scaling: ScalingDiagonal, p_newton: Optional[np.ndarray], delta: float) -> TrialStep:
    if p_newton is not None:
        newton_scaled = apply_D(scaling, p_newton)
        newton_norm = float(np.linalg.norm(newton_scaled))
        if newton_norm <= delta:
            return TrialStep(np.array(p_newton, dtype=float), StepKind.NEWTON_INSIDE, newton_norm)

    g_hat, g_hat_sq, curvature = _steepest_descent_data(ctx, scaling)
    g_hat_norm = math.sqrt(g_hat_sq)
    p_u = -(g_hat_sq / curvature) * g_hat
    p_u_norm = float(np.linalg.norm(p_u))

    if p_u_norm >= delta:
        p_scaled = -(delta / g_hat_norm) * g_hat
        kind = StepKind.SCALED_STEEPEST_TRUNCATED
    elif p_newton is not None:
        t = dogleg_fraction(p_u, newton_scaled, delta)
        p_scaled = p_u + t * (newton_scaled - p_u)
        kind = StepKind.DOGLEG_INTERPOLATED
    else:
        p_scaled = p_u
        kind = StepKind.CAUCHY_FALLBACK

    p = apply_D_inverse(scaling, p_scaled)
    return TrialStep(p, kind, float(np.linalg.norm(apply_D(scaling, p))))


def cauchy_point(ctx: ModelContext, scaling: ScalingDiagonal, delta: float):
    """Minimizer of the model along -D^-2 g inside the trust region; returns (p_c, tau)."""
    g_hat, g_hat_sq, curvature = _steepest_descent_data(ctx, scaling)
    tau = min(g_hat_sq / curvature, delta / math.sqrt(g_hat_sq))
    return -tau * apply_D_inverse_squared(scaling, ctx.grad), tau


def step_to_boundary(x, p, bounds: Bounds) -> float:
    """Largest multiple of p that keeps x + lambda p inside the box (inf when nothing blocks)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    moving = p != 0.0
    if bounds.is_unbounded or not np.any(moving):
        return math.inf
    pm = p[moving]
    xm = x[moving]
    ratios = np.maximum((bounds.lower[moving] - xm) / pm, (bounds.upper[moving] - xm) / pm)
    return float(np.min(ratios))


def truncate_step(p, lam: float, theta: float) -> np.ndarray:
    """Full step if it stays inside, otherwise max(theta, 1 - ||p||) * lambda * p."""
    p = np.asarray(p, dtype=float)
    if lam > 1.0:
        return p.copy()
    factor = max(theta, 1.0 - float(np.linalg.norm(p)))
    return factor * lam * p


def rho_c(ctx: ModelContext, alpha_p, alpha_pc) -> float:
    """Model decrease of the truncated trial step relative to the truncated Cauchy step."""
    denom = ctx.f - model_value(ctx, alpha_pc)
    if not denom > 0.0:
        raise ZeroCauchyDecrease(f"Cauchy step decreases the model by {denom:.3g}")
    return (ctx.f - model_value(ctx, alpha_p)) / denom


def rho_f(f_at_x: float, f_at_trial: float, model_decrease: float) -> float:
    """Actual over predicted reduction of the merit function."""
    if not model_decrease > 0.0:
        raise NonPositivePredictedDecrease(f"predicted decrease {model_decrease:.3g}")
    return (f_at_x - f_at_trial) / model_decrease
