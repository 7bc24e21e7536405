"""Bound-constrained nonlinear systems F(x) = 0, l <= x <= u, and evaluation services."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidStartingPoint, NonFiniteEvaluation

ResidualFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], np.ndarray]

_SQRT_EPS = np.sqrt(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class Bounds:
    """Box bounds with IEEE infinities for missing sides."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError(f"bounds length mismatch: {lower.size} lower vs {upper.size} upper")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("bounds must not contain NaN")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise ValueError("lower bounds may not be +inf and upper bounds may not be -inf")
        if not np.all(lower < upper):
            bad = int(np.flatnonzero(~(lower < upper))[0])
            raise ValueError(f"degenerate box in coordinate {bad}: {lower[bad]} >= {upper[bad]}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unbounded(cls, n: int) -> "Bounds":
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    @property
    def size(self) -> int:
        return self.lower.size

    @property
    def is_unbounded(self) -> bool:
        return bool(np.all(np.isneginf(self.lower)) and np.all(np.isposinf(self.upper)))

    def is_interior(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            x.shape == self.lower.shape
            and np.all(np.isfinite(x))
            and np.all(self.lower < x)
            and np.all(x < self.upper)
        )


@dataclass(frozen=True, eq=False)
class ProblemDefinition:
    """An immutable square nonlinear system on a box.

    ``equations`` optionally holds the expression source of each residual
    component; problems that carry it can be exported to ``.nls`` files.
    """

    name: str
    dimension: int
    residual: ResidualFn
    bounds: Bounds
    starting_points: tuple = ()
    jacobian: Optional[JacobianFn] = None
    known_solution: Optional[np.ndarray] = None
    equations: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        n = self.dimension
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"dimension must be a positive integer, got {n!r}")
        if self.bounds.size != n:
            raise ValueError(f"bounds have length {self.bounds.size}, expected {n}")
        starts = []
        for i, x0 in enumerate(self.starting_points):
            x0 = np.array(x0, dtype=float).reshape(-1)
            if x0.size != n:
                raise InvalidStartingPoint(f"{self.name}: starting point {i} has length {x0.size}, expected {n}")
            if not self.bounds.is_interior(x0):
                raise InvalidStartingPoint(f"{self.name}: starting point {i} is not strictly interior")
            x0.flags.writeable = False
            starts.append(x0)
        object.__setattr__(self, "starting_points", tuple(starts))
        if self.known_solution is not None:
            sol = np.array(self.known_solution, dtype=float).reshape(-1)
            if sol.size != n:
                raise ValueError(f"{self.name}: known solution has length {sol.size}, expected {n}")
            sol.flags.writeable = False
            object.__setattr__(self, "known_solution", sol)
        if self.equations is not None:
            eqs = tuple(self.equations)
            if len(eqs) != n:
                raise ValueError(f"{self.name}: {len(eqs)} equations for dimension {n}")
            object.__setattr__(self, "equations", eqs)

    def has_interior_solution(self) -> bool:
        return self.known_solution is not None and self.bounds.is_interior(self.known_solution)


@dataclass
class EvaluationCounter:
    residual_evals: int = 0
    jacobian_evals: int = 0


def _check_finite(values: np.ndarray, what: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteEvaluation(f"non-finite {what} at x={x.tolist()}")


def evaluate_residual(problem: ProblemDefinition, x, counter: Optional[EvaluationCounter] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.dimension,):
        raise ValueError(f"x has shape {x.shape}, expected ({problem.dimension},)")
    if counter is not None:
        counter.residual_evals += 1
    with np.errstate(all="ignore"):
        try:
            F = np.asarray(problem.residual(x.copy()), dtype=float).reshape(-1)
        except (OverflowError, ZeroDivisionError, ValueError) as exc:
            raise NonFiniteEvaluation(f"residual evaluation failed at x={x.tolist()}: {exc}") from exc
    if F.shape != (problem.dimension,):
        raise ValueError(f"{problem.name}: residual returned shape {F.shape}")
    _check_finite(F, "residual", x)
    return F


def evaluate_merit(problem: ProblemDefinition, x, counter: Optional[EvaluationCounter] = None,
                   residual: Optional[np.ndarray] = None) -> float:
    """Return f(x) = ||F(x)||^2 / 2.

    Pass ``residual`` when F(x) is already known; no evaluation is consumed then.
    """
    F = evaluate_residual(problem, x, counter) if residual is None else np.asarray(residual, dtype=float)
    return 0.5 * float(F @ F)


def finite_difference_jacobian(problem: ProblemDefinition, x, F_x, counter: Optional[EvaluationCounter] = None) -> np.ndarray:
    """Forward-difference Jacobian that keeps every perturbed point inside the box.

    Column j uses h_j = sqrt(eps) * max(|x_j|, 1); when x_j + h_j reaches the
    upper bound the step is taken backwards instead.
    """
    x = np.asarray(x, dtype=float)
    F_x = np.asarray(F_x, dtype=float)
    n = problem.dimension
    lower, upper = problem.bounds.lower, problem.bounds.upper
    J = np.empty((n, n))
    for j in range(n):
        h = _SQRT_EPS * max(abs(x[j]), 1.0)
        if x[j] + h >= upper[j]:
            h = -h
            if x[j] + h <= lower[j]:
                # box narrower than the step: go half way to the farther bound
                h = 0.5 * (upper[j] - x[j]) if upper[j] - x[j] > x[j] - lower[j] else -0.5 * (x[j] - lower[j])
        xp = x.copy()
        xp[j] = x[j] + h
        J[:, j] = (evaluate_residual(problem, xp, counter) - F_x) / (xp[j] - x[j])
    return J


def evaluate_jacobian(problem: ProblemDefinition, x, F_x, counter: Optional[EvaluationCounter] = None) -> np.ndarray:
    """Analytic Jacobian when the problem has one, finite differences otherwise."""
    x = np.asarray(x, dtype=float)
    if counter is not None:
        counter.jacobian_evals += 1
    if problem.jacobian is None:
        return finite_difference_jacobian(problem, x, F_x, counter)
    with np.errstate(all="ignore"):
        J = np.asarray(problem.jacobian(x.copy()), dtype=float)
    n = problem.dimension
    if J.shape != (n, n):
        raise ValueError(f"{problem.name}: jacobian returned shape {J.shape}, expected ({n}, {n})")
    _check_finite(J, "jacobian", x)
    return J


def project_to_interior(x, bounds: Bounds, margin: float = 0.01) -> np.ndarray:
    """Clip x so finite-bounded coordinates sit at least margin * min(u - l, 1) inside the box."""
    if not 0.0 < margin < 0.5:
        raise ValueError("margin must lie in (0, 1/2)")
    x = np.array(x, dtype=float)
    width = np.minimum(bounds.upper - bounds.lower, 1.0)
    lo = np.where(np.isfinite(bounds.lower), bounds.lower + margin * width, -np.inf)
    hi = np.where(np.isfinite(bounds.upper), bounds.upper - margin * width, np.inf)
    return np.clip(x, lo, hi)
