#!/usr/bin/env python3
"""Plan the two-agent pipe example and cross-check it with the direct solver."""
import argparse
import math
import time

from rigidplan.oracle import DiscretizedProblem, compare, pmp_residuals, solve_direct
from rigidplan.planner import evaluate_cost, plan, sample_trajectory
from rigidplan.scenarios import bundled_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--knots", type=int, nargs="+", default=[25, 50, 100, 200])
    args = parser.parse_args()

    bc = bundled_scenario("example1").boundary()
    start = time.perf_counter()
    sol = plan(bc)
    elapsed = time.perf_counter() - start
    print(f"closed form  J = {sol.cost:.10f}  ({elapsed * 1e6:.0f} us)")
    print(f"             omega = {sol.omega:.12f}  (-pi/6 = {-math.pi / 6:.12f})")
    print(f"             u_c = ({sol.u_c[0]:.12f}, {sol.u_c[1]:.12f})")
    traj = sample_trajectory(sol, 201)
    diag = pmp_residuals(traj)
    print(f"             quadrature J = {evaluate_cost(traj):.10f}, mu = {diag.mu_mean:.6f}"
          f" (-omega^2/2 = {-sol.omega**2 / 2:.6f})")
    print()
    print(f"{'knots':>6} {'oracle J':>14} {'gap':>11} {'deviation':>10} {'steps':>6}")
    for m in args.knots:
        res = solve_direct(DiscretizedProblem(m, bc))
        rep = compare(sol, res)
        print(f"{m:6d} {res.cost:14.10f} {rep.cost_gap:+11.3e} {rep.relative_deviation:10.2e} {res.iterations:6d}"
              + ("" if res.converged else "  (not converged)"))


if __name__ == "__main__":
    main()
