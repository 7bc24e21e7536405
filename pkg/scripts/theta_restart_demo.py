"""Show how the truncation parameter theta matters near an active bound.

The system F = (x1, x2 - x1) has its root at the corner of [0, 100]^2, so
every step is cut short by the theta-truncation.  The script prints the
plain-solver iteration count for each theta of the restart schedule, then
runs the restart driver under a tight iteration budget.
"""
import argparse

import numpy as np

from strn.problem import Bounds, ProblemDefinition
from strn.solver import SolverParameters, solve, solve_with_variable_theta, theta_schedule


def corner_problem():
    return ProblemDefinition(
        name="corner_root", dimension=2,
        residual=lambda x: np.array([x[0], x[1] - x[0]]),
        jacobian=lambda x: np.array([[1.0, 0.0], [-1.0, 1.0]]),
        bounds=Bounds([0.0, 0.0], [100.0, 100.0]), starting_points=([60.0, 80.0],),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=9, help="max_iterations for the restart run")
    args = ap.parse_args()
    p = corner_problem()
    x0 = p.starting_points[0]
    for theta in theta_schedule():
        rep = solve(p, x0, SolverParameters(theta=theta))
        print(f"theta={theta:<8g} iterations={rep.iterations:<3} {rep.reason.label}")
    rep = solve_with_variable_theta(p, x0, SolverParameters(max_iterations=args.budget))
    print(f"\nrestart driver, max_iterations={args.budget}:")
    for a in rep.attempts:
        print(f"  theta={a.theta:<8g} {a.reason.label:<14} iterations={a.iterations}")
    print(f"result: {rep.reason.label}, x={rep.final_x}, F-evals over all attempts={rep.residual_evals}")


if __name__ == "__main__":
    main()
