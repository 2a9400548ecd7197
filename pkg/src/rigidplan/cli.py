"""``rigidplan`` command line: plan, verify and cross-check scenario files.

Exit codes: 0 success, 1 I/O failure, 2 malformed scenario or bad argument,
3 boundary configurations not congruent (incl. reflections), 4 residual or
gap threshold exceeded, 5 direct solver did not converge.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NotCongruent, ReflectionRequired, RigidPlanError, ScenarioError
from .geometry import rigidity_residual
from .oracle import DiscretizedProblem, compare, pmp_residuals, solve_direct
from .planner import PlanSolution, control_sum_residual, evaluate_cost, plan, sample_trajectory
from .scenarios import Scenario, load_scenario
from .trajectory import Trajectory

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_CONGRUENCE, EXIT_THRESHOLD, EXIT_NOT_CONVERGED = range(6)

DEFAULT_THRESHOLDS = {
    "rigidity": 1e-9,
    "com_accel": 1e-8,
    "parallelism": 1e-6,
    "control_sum": 1e-12,
    "gap": 1e-2,
    "undercut": 1e-3,
}


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def parse_thresholds(text: str | None) -> dict:
    """``"1e-6"`` sets every threshold; ``"rigidity=1e-9,gap=0.02"`` sets named ones."""
    out = dict(DEFAULT_THRESHOLDS)
    if not text:
        return out
    try:
        if "=" not in text:
            value = float(text)
            return {k: value for k in out}
        for item in text.split(","):
            key, _, value = item.partition("=")
            key = key.strip()
            if key not in out:
                raise _Fail(EXIT_INPUT, f"unknown threshold {key!r}; known: {', '.join(out)}")
            out[key] = float(value)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, f"bad --thresholds value: {exc}") from None
    return out


def _load(args) -> Scenario:
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read scenario: {exc}") from None
    except ScenarioError as exc:
        raise _Fail(EXIT_INPUT, f"malformed scenario: {exc}") from None
    overrides = {}
    for key in ("samples", "tol", "winding"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if overrides.get("samples", scenario.samples) < 2:
        raise _Fail(EXIT_INPUT, "samples must be >= 2")
    if overrides.get("tol", scenario.tol) <= 0:
        raise _Fail(EXIT_INPUT, "tol must be positive")
    return dataclasses.replace(scenario, **overrides)


def _plan(scenario: Scenario) -> PlanSolution:
    try:
        return plan(scenario.boundary())
    except ReflectionRequired as exc:
        raise _Fail(EXIT_CONGRUENCE, f"congruence check failed (reflection): {exc}") from None
    except NotCongruent as exc:
        raise _Fail(EXIT_CONGRUENCE, f"congruence check failed: {exc}") from None
    except (RigidPlanError, ValueError) as exc:
        raise _Fail(EXIT_INPUT, f"invalid scenario: {exc}") from None


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trajectory_csv(path, traj: Trajectory, sol: PlanSolution) -> None:
    """Columns: t, then x_i,y_i,ux_i,uy_i per agent, then xc,yc,theta."""
    n = traj.n_agents
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"x_{i}", f"y_{i}", f"ux_{i}", f"uy_{i}"]
    header += ["xc", "yc", "theta"]
    com = traj.com()
    theta = sol.heading(traj.times)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, t in enumerate(traj.times):
            row = [_fmt(t)]
            for i in range(n):
                row += [_fmt(v) for v in (*traj.states[k, i], *traj.controls[k, i])]
            row += [_fmt(com[k, 0]), _fmt(com[k, 1]), _fmt(theta[k])]
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = (len(header) - 4) // 4
    agents = body[:, 1 : 1 + 4 * n].reshape(len(body), n, 4)
    return Trajectory(body[:, 0], agents[:, :, :2], agents[:, :, 2:])


def summary(scenario: Scenario, sol: PlanSolution, traj: Trajectory) -> dict:
    return {
        "name": scenario.name,
        "n_agents": sol.n_agents,
        "t_f": sol.t_f,
        "winding": sol.winding,
        "cost": sol.cost,
        "u_c": [float(v) for v in sol.u_c],
        "omega": sol.omega,
        "delta_theta": sol.delta_theta,
        "theta0": sol.theta0,
        "inertia": sol.shape.inertia,
        "samples": traj.n_samples,
        "rigidity_residual": rigidity_residual(traj),
    }


def cmd_plan(args) -> int:
    scenario = _load(args)
    sol = _plan(scenario)
    traj = sample_trajectory(sol, scenario.samples)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "trajectory.csv", traj, sol)
        with open(out / "summary.json", "w") as fh:
            json.dump(summary(scenario, sol, traj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write results: {exc}") from None
    print(f"{scenario.name}: J = {sol.cost:.6f}, omega = {sol.omega:.6f}, "
          f"u_c = ({sol.u_c[0]:.6f}, {sol.u_c[1]:.6f})")
    print(f"wrote {out / 'trajectory.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def verification_residuals(sol: PlanSolution, traj: Trajectory) -> dict:
    diag = pmp_residuals(traj)
    speed = sol.n_agents * float(np.linalg.norm(sol.u_c)) + abs(sol.omega) * float(sol.shape.radii.sum())
    return {
        "rigidity": rigidity_residual(traj),
        "com_accel": diag.com_accel_residual,
        "parallelism": diag.parallelism_residual,
        "control_sum": control_sum_residual(traj, sol) / max(speed, 1.0),
    }


def cmd_verify(args) -> int:
    scenario = _load(args)
    thresholds = parse_thresholds(args.thresholds)
    if scenario.samples < 5:
        raise _Fail(EXIT_INPUT, "verify needs at least 5 samples")
    sol = _plan(scenario)
    traj = sample_trajectory(sol, scenario.samples)
    residuals = verification_residuals(sol, traj)
    ok = True
    print(f"{'check':<12} {'residual':>12} {'threshold':>12}  status")
    for key, value in residuals.items():
        passed = value <= thresholds[key]
        ok &= passed
        print(f"{key:<12} {value:12.3e} {thresholds[key]:12.3e}  {'pass' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_oracle(args) -> int:
    scenario = _load(args)
    thresholds = parse_thresholds(args.thresholds)
    if args.knots < 3:
        raise _Fail(EXIT_INPUT, f"--knots must be >= 3, got {args.knots}")
    if args.max_iters is not None and args.max_iters < 1:
        raise _Fail(EXIT_INPUT, "--max-iters must be >= 1")
    sol = _plan(scenario)
    extra = {} if args.max_iters is None else {"max_iters": args.max_iters}
    problem = DiscretizedProblem(args.knots, scenario.boundary(), **extra)
    result = solve_direct(problem)
    report = compare(sol, result)
    print(f"closed-form cost   {sol.cost:.8f}")
    print(f"oracle cost        {result.cost:.8f}  (knots={args.knots})")
    print(f"relative gap       {report.cost_gap:+.3e}")
    print(f"max deviation      {report.max_deviation:.3e}  ({report.relative_deviation:.3e} of scale)")
    print(f"constraint viol.   {result.max_constraint_violation:.3e}")
    print(f"converged          {result.converged}  ({result.iterations} Newton steps)")
    if not result.converged:
        return EXIT_NOT_CONVERGED
    if not -thresholds["undercut"] <= report.cost_gap <= thresholds["gap"]:
        return EXIT_THRESHOLD
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rigidplan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--samples", type=int, help="override number of time samples")
        p.add_argument("--tol", type=float, help="override congruence tolerance")
        p.add_argument("--winding", type=int, help="override extra full turns")

    p = sub.add_parser("plan", help="closed-form plan; writes trajectory.csv and summary.json")
    common(p)
    p.add_argument("-o", "--out", default="rigidplan_out", help="output directory")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="residual checks on the planned trajectory")
    common(p)
    p.add_argument("--thresholds", help="'1e-6' for all, or 'rigidity=1e-9,com_accel=1e-8,...'")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="cross-check against the full-coordinate direct solver")
    common(p)
    p.add_argument("--knots", type=int, default=50, help="time knots of the transcription")
    p.add_argument("--max-iters", type=int, help="Newton step budget of the direct solver")
    p.add_argument("--thresholds", help="gap=<max relative excess>,undercut=<max relative deficit>")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help / --version exit 0; usage errors map onto the bad-input code
        return EXIT_OK if not exc.code else EXIT_INPUT
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"rigidplan: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
