"""Built-in test problems.

The collection is small but touches every solver path: Newton steps inside
the region, dogleg and truncated steepest-descent steps, Cauchy fallbacks on
singular Jacobians, and theta-truncation against an active bound.  Each
problem carries its expression form so it can be exported to ``.nls``.
"""
from __future__ import annotations

import difflib
import math
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np

from .errors import UnknownProblem
from .problem import Bounds, ProblemDefinition

INF = math.inf


def _affine_box() -> ProblemDefinition:
    A = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
    b = np.array([3.0, 0.0, 3.0])
    return ProblemDefinition(
        name="affine_box",
        dimension=3,
        residual=lambda x: A @ x - b,
        jacobian=lambda x: A.copy(),
        bounds=Bounds([-10.0] * 3, [10.0] * 3),
        starting_points=([0.5, -0.5, 1.5], [1.5, -1.2, 2.4]),
        known_solution=[1.0, -1.0, 2.0],
        equations=("4*x1 + x2 - 3", "x1 + 3*x2 + x3", "x2 + 2*x3 - 3"),
        description="Well-conditioned linear system; one Newton step from either start.",
    )


def _rosenbrock_residual(x):
    return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])


def _rosenbrock_jacobian(x):
    return np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])


_ROSENBROCK_EQS = ("10*(x2 - x1^2)", "1 - x1")


def _rosenbrock_system() -> ProblemDefinition:
    return ProblemDefinition(
        name="rosenbrock_system",
        dimension=2,
        residual=_rosenbrock_residual,
        jacobian=_rosenbrock_jacobian,
        bounds=Bounds.unbounded(2),
        starting_points=([-1.2, 1.0], [2.5, -1.0]),
        known_solution=[1.0, 1.0],
        equations=_ROSENBROCK_EQS,
        description="Rosenbrock residuals on the whole plane (no scaling, no truncation).",
    )


def _rosenbrock_box() -> ProblemDefinition:
    return ProblemDefinition(
        name="rosenbrock_box",
        dimension=2,
        residual=_rosenbrock_residual,
        jacobian=_rosenbrock_jacobian,
        bounds=Bounds([-2.0, -2.0], [2.0, 2.0]),
        starting_points=([-1.2, 1.0], [1.9, -1.9]),
        known_solution=[1.0, 1.0],
        equations=_ROSENBROCK_EQS,
        description="Rosenbrock residuals restricted to [-2, 2]^2.",
    )


def _brown_almost_linear(n: int = 5) -> ProblemDefinition:
    def residual(x):
        F = x + x.sum() - (n + 1)
        F[-1] = np.prod(x) - 1.0
        return F

    def jacobian(x):
        J = np.ones((n, n)) + np.eye(n)
        for j in range(n):
            J[-1, j] = np.prod(np.delete(x, j))
        return J

    total = " + ".join(f"x{j + 1}" for j in range(n))
    eqs = tuple(f"x{i + 1} + {total} - {n + 1}" for i in range(n - 1))
    eqs += ("*".join(f"x{j + 1}" for j in range(n)) + " - 1",)
    return ProblemDefinition(
        name="brown_almost_linear",
        dimension=n,
        residual=residual,
        jacobian=jacobian,
        bounds=Bounds([0.0] * n, [2.0] * n),
        starting_points=([0.5] * n, [1.5, 0.5, 1.5, 0.5, 1.5][:n]),
        known_solution=[1.0] * n,
        equations=eqs,
        description="Brown's almost-linear system on [0, 2]^n.",
    )


def _powell_badly_scaled() -> ProblemDefinition:
    def residual(x):
        return np.array([1e4 * x[0] * x[1] - 1.0, math.exp(-x[0]) + math.exp(-x[1]) - 1.0001])

    def jacobian(x):
        return np.array([[1e4 * x[1], 1e4 * x[0]], [-math.exp(-x[0]), -math.exp(-x[1])]])

    return ProblemDefinition(
        name="powell_badly_scaled",
        dimension=2,
        residual=residual,
        jacobian=jacobian,
        bounds=Bounds([0.0, 0.0], [1.0, 100.0]),
        starting_points=([1e-3, 1.0], [0.5, 50.0]),
        known_solution=[1.0981593296998175e-05, 9.106146739866524],
        equations=("10000*x1*x2 - 1", "exp(-x1) + exp(-x2) - 1.0001"),
        description="Powell's badly scaled system; the root sits 1e-5 away from a bound.",
    )


def _boundary_root() -> ProblemDefinition:
    return ProblemDefinition(
        name="boundary_root",
        dimension=2,
        residual=lambda x: np.array([x[0], x[1] - x[0]]),
        jacobian=lambda x: np.array([[1.0, 0.0], [-1.0, 1.0]]),
        bounds=Bounds([0.0, 0.0], [1.0, 1.0]),
        starting_points=([0.5, 0.5], [0.9, 0.2]),
        known_solution=[0.0, 0.0],
        equations=("x1", "x2 - x1"),
        description="Root at a corner of the box; every Newton step is truncated by theta.",
    )


def _chemical_equilibrium_toy() -> ProblemDefinition:
    # 2B <-> A with [B]^2 = K [A] and mass balance [A] + [B]/2 = 1, K = 10
    K, total = 10.0, 1.0
    b_star = (-K / 2 + math.sqrt(K * K / 4 + 4 * K * total)) / 2
    return ProblemDefinition(
        name="chemical_equilibrium_toy",
        dimension=2,
        residual=lambda x: np.array([x[1] ** 2 - K * x[0], x[0] + 0.5 * x[1] - total]),
        jacobian=lambda x: np.array([[-K, 2.0 * x[1]], [1.0, 0.5]]),
        bounds=Bounds([0.0, 0.0], [1.0, 2.0]),
        starting_points=([0.5, 0.5], [0.999, 0.001]),
        known_solution=[total - b_star / 2, b_star],
        equations=("x2^2 - 10*x1", "x1 + 0.5*x2 - 1"),
        description="Mass-action equilibrium with positivity bounds; second start hugs two bounds.",
    )


def _singular_jacobian_case() -> ProblemDefinition:
    return ProblemDefinition(
        name="singular_jacobian_case",
        dimension=2,
        residual=lambda x: np.array([x[0] ** 2, x[0] * x[1]]),
        jacobian=lambda x: np.array([[2.0 * x[0], 0.0], [x[1], x[0]]]),
        bounds=Bounds.unbounded(2),
        starting_points=([1.0, 1.0], [1e-9, 1e7]),
        known_solution=[0.0, 0.0],
        equations=("x1^2", "x1*x2"),
        description="Jacobian singular on the whole root set x1 = 0; the second start is numerically singular.",
    )


def _himmelblau_system() -> ProblemDefinition:
    def residual(x):
        a = x[0] ** 2 + x[1] - 11.0
        b = x[0] + x[1] ** 2 - 7.0
        return np.array([4.0 * x[0] * a + 2.0 * b, 2.0 * a + 4.0 * x[1] * b])

    def jacobian(x):
        a = x[0] ** 2 + x[1] - 11.0
        b = x[0] + x[1] ** 2 - 7.0
        return np.array([
            [4.0 * a + 8.0 * x[0] ** 2 + 2.0, 4.0 * x[0] + 4.0 * x[1]],
            [4.0 * x[0] + 4.0 * x[1], 2.0 + 4.0 * b + 8.0 * x[1] ** 2],
        ])

    return ProblemDefinition(
        name="himmelblau_system",
        dimension=2,
        residual=residual,
        jacobian=jacobian,
        bounds=Bounds([-5.0, -5.0], [5.0, 5.0]),
        starting_points=([2.5, 2.5], [-2.5, 3.5], [-3.5, -3.5], [3.5, -1.5]),
        known_solution=[3.0, 2.0],
        equations=(
            "4*x1*(x1^2 + x2 - 11) + 2*(x1 + x2^2 - 7)",
            "2*(x1^2 + x2 - 11) + 4*x2*(x1 + x2^2 - 7)",
        ),
        description="Stationarity system of Himmelblau's function on [-5, 5]^2.",
    )


def _rank_deficient_linear() -> ProblemDefinition:
    return ProblemDefinition(
        name="rank_deficient_linear",
        dimension=2,
        residual=lambda x: np.array([x[0] + x[1] - 1.0, 2.0 * x[0] + 2.0 * x[1] - 2.0]),
        jacobian=lambda x: np.array([[1.0, 1.0], [2.0, 2.0]]),
        bounds=Bounds.unbounded(2),
        starting_points=([0.0, 0.0], [3.0, -1.0]),
        known_solution=[0.5, 0.5],
        equations=("x1 + x2 - 1", "2*x1 + 2*x2 - 2"),
        description="Consistent rank-one linear system; only the steepest-descent branch applies.",
    )


_BUILDERS = (
    _affine_box,
    _rosenbrock_system,
    _rosenbrock_box,
    _brown_almost_linear,
    _powell_badly_scaled,
    _boundary_root,
    _chemical_equilibrium_toy,
    _singular_jacobian_case,
    _himmelblau_system,
    _rank_deficient_linear,
)

SOLUTION_CHECK_TOL = 1e-10


@lru_cache(maxsize=1)
def registry() -> Dict[str, ProblemDefinition]:
    problems: Dict[str, ProblemDefinition] = {}
    for build in _BUILDERS:
        problem = build()
        if problem.name in problems:
            raise RuntimeError(f"duplicate suite problem {problem.name!r}")
        if problem.known_solution is not None:
            norm = float(np.linalg.norm(problem.residual(problem.known_solution.copy())))
            if norm > SOLUTION_CHECK_TOL:
                raise RuntimeError(f"{problem.name}: known solution has residual norm {norm:.3g}")
        problems[problem.name] = problem
    return problems


def list_problems(filter: str = "") -> List[Tuple[str, int, int]]:
    return [
        (name, p.dimension, len(p.starting_points))
        for name, p in registry().items()
        if filter in name
    ]


def get_problem(name: str) -> ProblemDefinition:
    problems = registry()
    try:
        return problems[name]
    except KeyError:
        raise UnknownProblem(name, difflib.get_close_matches(name, problems, n=3, cutoff=0.5)) from None


def problem_names() -> List[str]:
    return list(registry())
