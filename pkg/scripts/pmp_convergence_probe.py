#!/usr/bin/env python3
"""How the finite-difference optimality residuals behave under grid refinement.

On a planned trajectory the CoM acceleration and the bar-orthogonal part of
the relative acceleration are exactly zero, so the central-difference
residuals contain only rounding error, which grows like eps/h^2.  The
one-sided end stencil is shown separately: it carries a genuine truncation
error that shrinks with h.
"""
import argparse

import numpy as np

from rigidplan.geometry import cross2, formation_scale
from rigidplan.oracle import pmp_residuals, second_derivative
from rigidplan.planner import plan, sample_trajectory
from rigidplan.scenarios import bundled_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="example1")
    parser.add_argument("--samples", type=int, nargs="+", default=[101, 201, 401, 801, 1601])
    args = parser.parse_args()

    sol = plan(bundled_scenario(args.scenario).boundary())
    print(f"{'samples':>8} {'com_accel':>11} {'parallel':>11} {'end stencil':>12}")
    prev = None
    for n in args.samples:
        traj = sample_trajectory(sol, n)
        diag = pmp_residuals(traj)
        h = traj.times[1]
        d = traj.states[:, 0] - traj.states[:, 1]
        scale = formation_scale(traj.states[0])
        end = float(np.abs(cross2(d, second_derivative(d, h))[[0, -1]]).max()) * sol.t_f**2 / scale**2
        line = f"{n:8d} {diag.com_accel_residual:11.2e} {diag.parallelism_residual:11.2e} {end:12.2e}"
        if prev is not None:
            line += "   ratios " + " ".join(f"{a / b:5.2f}" for a, b in zip(prev, (diag.com_accel_residual, diag.parallelism_residual, end)))
        print(line)
        prev = (diag.com_accel_residual, diag.parallelism_residual, end)


if __name__ == "__main__":
    main()
