import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigidplan.errors import InvalidSampleCount, MismatchedProblems, NonUniformGrid, NotCongruent, TooFewSamples
from rigidplan.geometry import constraint_count, rigidity_residual
from rigidplan.oracle import (
    DiscretizedProblem,
    OracleSolution,
    _Transcription,
    compare,
    fan_pairs,
    full_rigidity_violation,
    pmp_residuals,
    second_derivative,
    solve_direct,
)
from rigidplan.planner import BoundaryConditions, plan, sample_trajectory, straight_line_trajectory
from rigidplan.scenarios import random_congruent_boundary
from rigidplan.trajectory import Trajectory

from .conftest import EXAMPLE1_COST


@pytest.fixture(scope="module")
def example1_oracle():
    from .conftest import EXAMPLE1_INITIAL, EXAMPLE1_TERMINAL

    bc = BoundaryConditions(EXAMPLE1_INITIAL, EXAMPLE1_TERMINAL, 1.0)
    return bc, solve_direct(DiscretizedProblem(50, bc))


@pytest.mark.parametrize("n", range(2, 12))
def test_fan_pairs(n):
    pairs = fan_pairs(n)
    assert len(pairs) == constraint_count(n)
    assert len(set(map(frozenset, pairs))) == len(pairs)
    # every later agent is tied to both anchors
    for i in range(2, n):
        assert (0, i) in pairs and (1, i) in pairs


def test_problem_validation(example1):
    with pytest.raises(InvalidSampleCount):
        DiscretizedProblem(2, example1)
    with pytest.raises(ValueError):
        DiscretizedProblem(10, example1, constraint_pairs=[(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        DiscretizedProblem(10, example1, penalty_schedule=())


def _random_problem(seed, n=3, knots=7):
    bc = random_congruent_boundary(np.random.default_rng(seed), n)
    nlp = _Transcription(DiscretizedProblem(knots, bc))
    rng = np.random.default_rng(seed + 1)
    x = nlp.initial_guess() + 0.05 * rng.normal(size=nlp.initial_guess().size)
    lam = rng.normal(size=(nlp.m, nlp.pi.size))
    return nlp, x, lam


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_augmented_gradient_matches_central_differences(seed):
    nlp, x, lam = _random_problem(seed)
    _, g = nlp.augmented(x, lam, 10.0)
    eps = 1e-6
    fd = np.array([
        (nlp.augmented(x + eps * e, lam, 10.0)[0] - nlp.augmented(x - eps * e, lam, 10.0)[0]) / (2 * eps)
        for e in np.eye(x.size)
    ])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


def _dense_from_upper_banded(ab):
    b = ab.shape[0] - 1
    size = ab.shape[1]
    dense = np.zeros((size, size))
    for r in range(b + 1):
        off = b - r
        idx = np.arange(off, size)
        dense[idx - off, idx] = ab[r, off:]
        dense[idx, idx - off] = ab[r, off:]
    return dense


@pytest.mark.parametrize("seed", [0, 3])
def test_banded_hessian_matches_gradient_differences(seed):
    nlp, x, lam = _random_problem(seed, n=4, knots=6)
    H = _dense_from_upper_banded(nlp.hessian_banded(x, lam, 5.0))
    eps = 1e-6
    fd = np.column_stack([
        (nlp.augmented(x + eps * e, lam, 5.0)[1] - nlp.augmented(x - eps * e, lam, 5.0)[1]) / (2 * eps)
        for e in np.eye(x.size)
    ])
    np.testing.assert_allclose(H, fd, rtol=1e-5, atol=1e-6)


def test_example1_oracle(example1_oracle):
    bc, sol = example1_oracle
    assert sol.converged
    assert sol.cost == pytest.approx(EXAMPLE1_COST, rel=1e-2)
    assert sol.max_constraint_violation <= 1e-6
    report = compare(plan(bc), sol)
    assert -1e-3 <= report.cost_gap <= 1e-2


def test_oracle_cost_uses_evaluate_cost(example1_oracle):
    from rigidplan.planner import evaluate_cost

    _, sol = example1_oracle
    assert sol.cost == evaluate_cost(sol.trajectory)


def test_zero_displacement_converges_immediately():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]])
    sol = solve_direct(DiscretizedProblem(20, BoundaryConditions(pts, pts, 1.0)))
    assert sol.converged and sol.iterations == 0
    assert sol.cost == 0.0


def test_not_congruent_raises_before_iterating():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]])
    with pytest.raises(NotCongruent):
        solve_direct(DiscretizedProblem(20, BoundaryConditions(pts, 2 * pts, 1.0)))


def test_tiny_budget_reports_not_converged(example1):
    sol = solve_direct(DiscretizedProblem(50, example1, max_iters=1))
    assert isinstance(sol, OracleSolution)
    assert not sol.converged
    assert sol.iterations <= 1


@pytest.fixture(scope="module")
def refinement_costs():
    from .conftest import EXAMPLE1_INITIAL, EXAMPLE1_TERMINAL

    bc = BoundaryConditions(EXAMPLE1_INITIAL, EXAMPLE1_TERMINAL, 1.0)
    return plan(bc).cost, [solve_direct(DiscretizedProblem(m, bc)).cost for m in (25, 50, 100, 200)]


def test_refinement_gap_shrinks(refinement_costs):
    ref, costs = refinement_costs
    gaps = [abs(c - ref) / ref for c in costs]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    # knot chords cut the circular arc, so the transcription approaches from below
    assert all(c <= ref for c in costs)


@pytest.mark.xfail(
    strict=True,
    reason="the transcription converges to the optimum from below, so doubling M raises the cost "
    "by about the O(1/M^2) chord slack (1e-5 relative at M=25), above the 1e-6 allowance",
)
def test_refinement_does_not_raise_cost(refinement_costs):
    _, costs = refinement_costs
    for a, b in zip(costs, costs[1:]):
        assert b <= a * (1 + 1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_random_three_agent_deviation(seed):
    bc = random_congruent_boundary(np.random.default_rng(seed), 3)
    sol = solve_direct(DiscretizedProblem(100, bc))
    report = compare(plan(bc), sol)
    assert sol.converged
    assert report.relative_deviation <= 0.02
    assert full_rigidity_violation(sol.trajectory) <= 1e-6


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 4, 5]))
def test_oracle_never_beats_closed_form(seed, n):
    bc = random_congruent_boundary(np.random.default_rng(seed), n)
    sol = solve_direct(DiscretizedProblem(60, bc))
    if sol.converged:
        assert compare(plan(bc), sol).cost_gap >= -1e-3


def test_compare_self(example1):
    sol = plan(example1)
    traj = sample_trajectory(sol, 40)
    fake = OracleSolution(traj, sol.cost, 0.0, True, 0)
    report = compare(sol, fake)
    assert report.cost_gap == 0.0 and report.max_deviation == 0.0


def test_compare_mismatch(example1):
    sol = plan(example1)
    other = BoundaryConditions(example1.initial + 1, example1.terminal + 1, 1.0)
    fake = OracleSolution(sample_trajectory(plan(other), 10), 0.0, 0.0, True, 0)
    with pytest.raises(MismatchedProblems):
        compare(sol, fake)
    longer = OracleSolution(sample_trajectory(plan(BoundaryConditions(example1.initial, example1.terminal, 2.0)), 10), 0.0, 0.0, True, 0)
    with pytest.raises(MismatchedProblems):
        compare(sol, longer)


def test_second_derivative_exact_on_cubics():
    t = np.linspace(0, 2, 11)
    h = t[1] - t[0]
    f = 1 + 2 * t - t**2 + 0.5 * t**3
    # central stencil is exact for cubics inside, 4-point one-sided is exact at the ends
    np.testing.assert_allclose(second_derivative(f, h), -2 + 3 * t, atol=1e-10)


def test_pmp_example1_residuals(example1):
    traj = sample_trajectory(plan(example1), 201)
    diag = pmp_residuals(traj)
    assert diag.com_accel_residual <= 1e-8
    assert diag.parallelism_residual <= 1e-6
    np.testing.assert_allclose(diag.costates, -traj.controls)


def test_pmp_mu_is_constant_and_matches_centripetal(example1):
    sol = plan(example1)
    diag = pmp_residuals(sample_trajectory(sol, 401))
    # d = l s(theta) with uniform turn: d'' = -omega^2 d, so mu = -omega^2 / 2
    assert diag.mu_mean == pytest.approx(-sol.omega**2 / 2, rel=1e-4)
    assert diag.mu_max_deviation <= 1e-4 * abs(diag.mu_mean)


def test_pmp_straight_lines_do_not_accelerate(example1):
    diag = pmp_residuals(straight_line_trajectory(example1, 201))
    assert diag.com_accel_residual <= 1e-10


def test_pmp_detects_com_perturbation(example1):
    traj = sample_trajectory(plan(example1), 201)
    amp = 0.01
    bump = amp * np.sin(np.pi * traj.times)
    # analytic |r_c''| peaks at amp * pi^2 ~ 0.099; scale is the rod length 1
    states = traj.states + bump[:, None, None] * np.array([1.0, 0.0])
    diag = pmp_residuals(Trajectory(traj.times, states))
    assert diag.com_accel_residual > 1e-3
    assert diag.com_accel_residual == pytest.approx(amp * np.pi**2, rel=1e-3)


def test_pmp_preconditions(example1):
    traj = sample_trajectory(plan(example1), 4)
    with pytest.raises(TooFewSamples):
        pmp_residuals(traj)
    t = np.array([0.0, 0.1, 0.3, 0.6, 1.0])
    with pytest.raises(NonUniformGrid):
        pmp_residuals(Trajectory(t, np.zeros((5, 2, 2))))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_pmp_residuals_small_on_planned_paths(seed, n):
    bc = random_congruent_boundary(np.random.default_rng(seed), max(n, 3))
    traj = sample_trajectory(plan(bc), 201)
    diag = pmp_residuals(traj)
    assert 0 <= diag.com_accel_residual <= 1e-8
    assert 0 <= diag.parallelism_residual <= 1e-6
    assert rigidity_residual(traj) <= 1e-9
