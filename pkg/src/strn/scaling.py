"""Coleman-Li affine scaling for box constraints.

The scaling vector is built from the distance to the bound the negative
gradient points at::

    v_i = x_i - u_i   if g_i <  0 and u_i <  inf
    v_i = x_i - l_i   if g_i >= 0 and l_i > -inf
    v_i = -1          if g_i <  0 and u_i =  inf
    v_i =  1          if g_i >= 0 and l_i = -inf

and D = diag(|v|^(-1/2)).  Coordinates far from the relevant bound get a small
weight, so the ellipsoidal trust region ||D p|| <= delta stretches along them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScalingFailure
from .problem import Bounds

# |v_i| below this means the iterate sits on a bound to working precision
MIN_ABS_V = 1e-300


@dataclass(frozen=True, eq=False)
class ScalingDiagonal:
    v: np.ndarray
    d: np.ndarray


def compute_scaling(x, grad, bounds: Bounds) -> ScalingDiagonal:
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    descending = grad < 0  # -g points up, towards u
    v = np.where(
        descending,
        np.where(np.isfinite(bounds.upper), x - bounds.upper, -1.0),
        np.where(np.isfinite(bounds.lower), x - bounds.lower, 1.0),
    )
    absv = np.abs(v)
    if not np.all(absv >= MIN_ABS_V):
        bad = int(np.flatnonzero(~(absv >= MIN_ABS_V))[0])
        raise ScalingFailure(f"scaling vector vanishes in coordinate {bad} (|v|={absv[bad]:.3g})")
    d = 1.0 / np.sqrt(absv)
    if not np.all(np.isfinite(d)):
        raise ScalingFailure("scaling diagonal is not finite")
    return ScalingDiagonal(v=v, d=d)


def apply_D(s: ScalingDiagonal, p) -> np.ndarray:
    return s.d * np.asarray(p, dtype=float)


def apply_D_inverse(s: ScalingDiagonal, p) -> np.ndarray:
    return np.asarray(p, dtype=float) / s.d


def apply_D_inverse_squared(s: ScalingDiagonal, p) -> np.ndarray:
    # 1/d_i^2 == |v_i| exactly up to rounding; use |v| directly
    return np.abs(s.v) * np.asarray(p, dtype=float)


def scaled_gradient_norm(s: ScalingDiagonal, grad) -> float:
    return float(np.linalg.norm(apply_D_inverse(s, grad)))
