#!/usr/bin/env python3
"""Randomised comparison of the closed-form planner against the direct solver.

Prints gap statistics per formation size and optionally writes one CSV row
per scenario.
"""
import argparse
import csv
import time

import numpy as np

from rigidplan.oracle import DiscretizedProblem, compare, full_rigidity_violation, solve_direct
from rigidplan.planner import plan
from rigidplan.scenarios import random_congruent_boundary


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[3, 4])
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--knots", type=int, default=100)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--csv", help="write per-scenario rows here")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    for n in args.sizes:
        start = time.perf_counter()
        for k in range(args.count):
            bc = random_congruent_boundary(rng, n)
            sol = plan(bc)
            res = solve_direct(DiscretizedProblem(args.knots, bc))
            rep = compare(sol, res)
            rows.append({
                "n_agents": n, "index": k, "closed_form": sol.cost, "oracle": res.cost,
                "gap": rep.cost_gap, "deviation": rep.relative_deviation,
                "rigidity": full_rigidity_violation(res.trajectory),
                "converged": res.converged, "steps": res.iterations,
            })
        elapsed = time.perf_counter() - start
        sub = [r for r in rows if r["n_agents"] == n]
        gaps = np.array([r["gap"] for r in sub])
        print(f"N={n}: {len(sub)} runs in {elapsed:.1f} s, gap [{gaps.min():+.2e}, {gaps.max():+.2e}], "
              f"max deviation {max(r['deviation'] for r in sub):.1e}, "
              f"unconverged {sum(not r['converged'] for r in sub)}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


if __name__ == "__main__":
    main()
