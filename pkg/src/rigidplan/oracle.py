"""Independent checks of the CoM reduction.

``solve_direct`` optimises every agent path directly, without assuming the
formation moves as a (CoM, heading) pair: knot positions are the unknowns,
the 2N-3 distance constraints are imposed at every knot by an augmented
Lagrangian, and each penalty round is minimised by damped Newton steps on
the block-tridiagonal Hessian.  ``pmp_residuals`` checks
the stationarity conditions on any sampled trajectory by finite differences.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .errors import (
    InvalidSampleCount,
    MismatchedProblems,
    NonUniformGrid,
    TooFewSamples,
)
from .geometry import (
    SCALE_FLOOR,
    congruence_transform,
    constraint_count,
    cross2,
    formation_scale,
    pairwise_distances,
)
from .planner import BoundaryConditions, PlanSolution, evaluate_cost, sample_trajectory
from .trajectory import Trajectory

log = logging.getLogger(__name__)

VIOLATION_TOL = 1e-6


def fan_pairs(n: int) -> list[tuple[int, int]]:
    """Fan triangulation on agents 0 and 1: (0,1), then (0,i), (1,i) for i >= 2."""
    if n < 2:
        return []
    pairs = [(0, 1)]
    for i in range(2, n):
        pairs += [(0, i), (1, i)]
    assert len(pairs) == constraint_count(n)
    return pairs


def default_penalty_schedule() -> tuple[float, ...]:
    return tuple(10.0**k for k in range(9))


@dataclass(frozen=True, eq=False)
class DiscretizedProblem:
    knots: int
    boundary: BoundaryConditions
    constraint_pairs: Optional[Sequence[tuple[int, int]]] = None
    penalty_schedule: Sequence[float] = field(default_factory=default_penalty_schedule)
    max_iters: int = 500
    grad_tol: float = 1e-7
    feas_tol: float = 1e-9
    max_repairs: int = 3

    def __post_init__(self):
        if self.knots < 3:
            raise InvalidSampleCount(f"need at least 3 knots, got {self.knots}")
        n = self.boundary.n_agents
        pairs = fan_pairs(n) if self.constraint_pairs is None else [tuple(p) for p in self.constraint_pairs]
        if n >= 2 and len(pairs) != constraint_count(n):
            raise ValueError(f"expected {constraint_count(n)} constraint pairs, got {len(pairs)}")
        object.__setattr__(self, "constraint_pairs", pairs)
        if not 0 < self.feas_tol <= VIOLATION_TOL:
            raise ValueError(f"feas_tol must lie in (0, {VIOLATION_TOL}]")
        if not self.penalty_schedule or min(self.penalty_schedule) <= 0:
            raise ValueError("penalty schedule must be non-empty and positive")


@dataclass(frozen=True, eq=False)
class OracleSolution:
    trajectory: Trajectory
    cost: float
    max_constraint_violation: float
    converged: bool
    iterations: int
    objective: float = float("nan")
    grad_norm: float = float("nan")


@dataclass(frozen=True, eq=False)
class PMPDiagnostics:
    costates: np.ndarray
    mu_estimates: np.ndarray
    com_accel_residual: float
    parallelism_residual: float

    @property
    def mu_mean(self) -> float:
        return float(np.mean(self.mu_estimates)) if self.mu_estimates.size else float("nan")

    @property
    def mu_max_deviation(self) -> float:
        if not self.mu_estimates.size:
            return float("nan")
        return float(np.abs(self.mu_estimates - self.mu_mean).max())


@dataclass(frozen=True)
class Comparison:
    cost_gap: float
    max_deviation: float
    relative_deviation: float


class _Transcription:
    """Objective, constraints and their gradients for the knot-position NLP."""

    def __init__(self, problem: DiscretizedProblem):
        bc = problem.boundary
        self.m = problem.knots
        self.n = bc.n_agents
        self.h = bc.t_f / (self.m - 1)
        self.first = bc.initial
        self.last = bc.terminal
        self.scale = max(formation_scale(bc.initial), SCALE_FLOOR)
        pairs = np.asarray(problem.constraint_pairs, dtype=int).reshape(-1, 2)
        self.pi, self.pj = pairs[:, 0], pairs[:, 1]
        self.incidence = np.zeros((len(pairs), self.n))
        self.incidence[np.arange(len(pairs)), self.pi] += 1.0
        self.incidence[np.arange(len(pairs)), self.pj] -= 1.0
        d0 = bc.initial[self.pi] - bc.initial[self.pj]
        self.target = (d0**2).sum(-1)

    def full(self, x: np.ndarray) -> np.ndarray:
        interior = x.reshape(self.m - 2, self.n, 2)
        return np.concatenate([self.first[None], interior, self.last[None]])

    def initial_guess(self) -> np.ndarray:
        s = np.linspace(0.0, 1.0, self.m)[1:-1, None, None]
        return (self.first + s * (self.last - self.first)).ravel()

    def energy(self, path: np.ndarray):
        step = np.diff(path, axis=0)
        f = 0.5 * (step**2).sum() / self.h
        g = np.zeros_like(path)
        g[:-1] -= step / self.h
        g[1:] += step / self.h
        return f, g

    def constraints(self, path: np.ndarray):
        d = path[:, self.pi] - path[:, self.pj]
        c = ((d**2).sum(-1) - self.target) / self.scale**2
        return c, d

    def constraint_grad(self, weights: np.ndarray, d: np.ndarray) -> np.ndarray:
        # sum_p weights[k,p] * dc[k,p]/dpath[k]
        return np.einsum("kp,pn,kpd->knd", weights, self.incidence, d) * (2.0 / self.scale**2)

    def augmented(self, x, lam, rho):
        path = self.full(x)
        f, g = self.energy(path)
        c, d = self.constraints(path)
        w = lam + rho * c
        val = f + (lam * c).sum() + 0.5 * rho * (c**2).sum()
        g = g + self.constraint_grad(w, d)
        return val, g[1:-1].ravel()

    def hessian_banded(self, x, lam, rho) -> np.ndarray:
        """Upper banded form of the augmented-Lagrangian Hessian (knot-major ordering)."""
        path = self.full(x)
        c, d = self.constraints(path)
        w = (lam + rho * c)[1:-1]
        d = d[1:-1]
        k, b = self.m - 2, 2 * self.n
        k2 = 2.0 / self.scale**2
        # curvature of each constraint: k2 * (e_i - e_j)(e_i - e_j)^T (x) I_2
        lap = np.einsum("kp,pn,pm->knm", w, self.incidence, self.incidence) * k2
        blocks = np.einsum("knm,ab->knamb", lap, np.eye(2)).reshape(k, b, b)
        jac = k2 * np.einsum("pn,kpa->kpna", self.incidence, d).reshape(k, -1, b)
        blocks += rho * np.einsum("kpa,kpb->kab", jac, jac)
        blocks[:, np.arange(b), np.arange(b)] += 2.0 / self.h
        ab = np.zeros((b + 1, k * b))
        cols = np.arange(k * b).reshape(k, b)
        for off in range(b):
            # entries (r, r + off) inside each diagonal block
            ab[b - off, cols[:, off:]] = blocks[:, np.arange(b - off), np.arange(off, b)]
        ab[0, b:] = -1.0 / self.h
        return ab

    def lagrangian_grad(self, x, lam) -> np.ndarray:
        path = self.full(x)
        _, g = self.energy(path)
        c, d = self.constraints(path)
        return (g + self.constraint_grad(lam, d))[1:-1].ravel()

    def violation(self, path: np.ndarray) -> float:
        if self.pi.size == 0:
            return 0.0
        d = path[:, self.pi] - path[:, self.pj]
        return float(np.abs(np.sqrt((d**2).sum(-1)) - np.sqrt(self.target)).max() / self.scale)


def _knot_trajectory(path: np.ndarray, t_f: float) -> Trajectory:
    times = np.linspace(0.0, t_f, path.shape[0])
    return Trajectory(times, path, first_derivative(path, t_f / (path.shape[0] - 1)))


def first_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative along axis 0, written in differences so a
    constant input gives exactly zero (``np.gradient``'s end stencil does not)."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * h)
    out[0] = (4 * (values[1] - values[0]) - (values[2] - values[0])) / (2 * h)
    out[-1] = ((values[-3] - values[-1]) - 4 * (values[-2] - values[-1])) / (2 * h)
    return out


def _unflip(path: np.ndarray, pairs) -> Optional[np.ndarray]:
    """Reflect agents that sit on the wrong side of their anchoring bar.

    With distance-only constraints an agent tied to both ends of a bar has two
    placements, mirror images across the bar.  A proper motion keeps the side
    seen at the pinned boundary knots, so knots on the other side are a
    spurious local minimum.  Returns the repaired path, or ``None`` if every
    knot already has the boundary orientation.
    """
    edges = {frozenset(p) for p in pairs}
    out = path.copy()
    changed = False
    n = path.shape[1]
    anchors = {}
    for k in range(n):
        for a, b in (tuple(sorted(e)) for e in edges):
            if b < k and {a, k} in edges and {b, k} in edges:
                anchors[k] = (a, b)
                break
    for agent, (a, b) in anchors.items():
        bar = path[:, b] - path[:, a]
        area = cross2(bar, path[:, agent] - path[:, a])
        ref = area[0]
        if abs(ref) <= 1e-6 * float((bar[0] ** 2).sum()) or np.sign(ref) != np.sign(area[-1]):
            continue
        wrong = np.sign(area) == -np.sign(ref)
        if not wrong.any():
            continue
        u = bar[wrong] / np.linalg.norm(bar[wrong], axis=1, keepdims=True)
        rel = out[wrong, agent] - out[wrong, a]
        along = (rel * u).sum(-1, keepdims=True) * u
        out[wrong, agent] = out[wrong, a] + 2 * along - rel
        changed = True
    return out if changed else None


def _newton(nlp: _Transcription, x, lam, rho, tol, budget, max_step):
    """Damped Newton on the augmented Lagrangian; returns (x, iterations)."""
    val, g = nlp.augmented(x, lam, rho)
    it = 0
    best, stale = np.abs(g).max(), 0
    while it < budget and np.abs(g).max() > tol and stale < 5:
        ab = nlp.hessian_banded(x, lam, rho)
        diag = ab[-1].copy()
        shift = 0.0
        while True:
            try:
                ab[-1] = diag + shift
                step = -cho_solve_banded((cholesky_banded(ab), False), g)
                break
            except LinAlgError:
                shift = max(10 * shift, 1e-10 * float(np.abs(diag).max()) + 1e-14)
        # trust-region style cap: no coordinate moves more than max_step
        longest = np.abs(step).max()
        if longest > max_step:
            step *= max_step / longest
        slope = float(g @ step)
        gnorm = np.abs(g).max()
        t = 1.0
        while True:
            trial = x + t * step
            tval, tg = nlp.augmented(trial, lam, rho)
            if tval <= val + 1e-4 * t * slope:
                break
            # near the optimum the decrease drops below the rounding of val;
            # fall back on the gradient norm there
            if tval <= val + 1e-13 * abs(val) and np.abs(tg).max() < 0.5 * gnorm:
                break
            if t < 1e-10:
                break
            t *= 0.5
        it += 1
        if tval > val + 1e-13 * abs(val) and np.abs(tg).max() >= gnorm:
            break
        x, val, g = trial, tval, tg
        gnorm = np.abs(g).max()
        # at large penalties the gradient bottoms out at rounding level
        if gnorm < 0.5 * best:
            best, stale = gnorm, 0
        else:
            stale += 1
    return x, it


def solve_direct(problem: DiscretizedProblem) -> OracleSolution:
    """Minimise the discretised kinetic energy with all agents as free unknowns.

    Never raises on non-convergence; inspect ``converged`` (the CLI maps it to
    an exit code).  Congruence errors on the boundary are raised up front.
    ``max_iters`` bounds the total number of Newton steps across all penalty
    rounds.  The penalty advances through ``penalty_schedule`` only while the
    knots are infeasible; after each round, agents caught on the mirrored side
    of their anchoring bar are reflected back (at most ``max_repairs`` times).
    """
    bc = problem.boundary
    congruence_transform(bc.initial, bc.terminal, bc.tol)
    nlp = _Transcription(problem)
    x = nlp.initial_guess()
    used = 0

    def status(x):
        path = nlp.full(x)
        gn = float(np.abs(nlp.lagrangian_grad(x, lam)).max()) if x.size else 0.0
        return path, gn, nlp.violation(path)

    schedule = list(problem.penalty_schedule)
    lam = np.zeros((nlp.m, nlp.pi.size))
    path, grad_norm, viol = status(x)
    converged = grad_norm <= problem.grad_tol and viol <= problem.feas_tol
    outer = repairs = stage = 0
    while not converged and used < problem.max_iters and outer < 4 * len(schedule):
        rho = schedule[min(stage, len(schedule) - 1)]
        x, it = _newton(
            nlp, x, lam, rho, 0.1 * problem.grad_tol, min(problem.max_iters - used, 100), 0.1 * nlp.scale
        )
        used += it
        repaired = _unflip(nlp.full(x), problem.constraint_pairs) if repairs < problem.max_repairs else None
        if repaired is not None:
            log.debug("outer %d: reflected mirrored knots back", outer)
            x = repaired[1:-1].ravel()
            repairs += 1
        c, _ = nlp.constraints(nlp.full(x))
        lam = lam + rho * c
        path, grad_norm, viol = status(x)
        converged = grad_norm <= problem.grad_tol and viol <= problem.feas_tol
        log.debug("outer %d rho=%g iters=%d viol=%.3g grad=%.3g", outer, rho, used, viol, grad_norm)
        outer += 1
        # stiffer penalties only raise the rounding floor once feasible
        if viol > problem.feas_tol:
            stage += 1

    traj = _knot_trajectory(path, bc.t_f)
    objective, _ = nlp.energy(path)
    return OracleSolution(
        trajectory=traj,
        cost=evaluate_cost(traj),
        max_constraint_violation=viol,
        converged=bool(converged),
        iterations=used,
        objective=float(objective),
        grad_norm=float(grad_norm),
    )


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Second derivative along axis 0: central inside, one-sided second order at the ends."""
    out = np.empty_like(values)
    out[1:-1] = values[2:] - 2 * values[1:-1] + values[:-2]
    out[0] = 2 * values[0] - 5 * values[1] + 4 * values[2] - values[3]
    out[-1] = 2 * values[-1] - 5 * values[-2] + 4 * values[-3] - values[-4]
    return out / h**2


def _uniform_step(times: np.ndarray) -> float:
    steps = np.diff(times)
    h = (times[-1] - times[0]) / (times.size - 1)
    if np.abs(steps - h).max() > 1e-9 * h:
        raise NonUniformGrid("pmp_residuals needs uniformly spaced samples")
    return h


def pmp_residuals(traj: Trajectory, pairs: Optional[Sequence[tuple[int, int]]] = None) -> PMPDiagnostics:
    """Finite-difference residuals of the optimality conditions.

    * CoM acceleration, ``max |r_c''| t_f^2 / scale``: zero on an optimum.
    * Parallelism, ``max |d x d''| t_f^2 / scale^2`` for each constrained pair
      ``d = r_i - r_j``: the multiplier force acts along the bar.
    * ``mu`` from the agent 1-2 bar, ``d'' = 2 mu d`` solved by least squares.

    Both residuals are maxima over interior samples (central differences);
    the one-sided end stencils only feed the per-sample ``mu`` estimates.
    """
    if traj.n_samples < 5:
        raise TooFewSamples(f"need at least 5 samples, got {traj.n_samples}")
    h = _uniform_step(traj.times)
    states = traj.states
    n = traj.n_agents
    t_f = traj.t_f
    com = states.mean(axis=1)
    scale = max(
        formation_scale(states[0]),
        float(np.linalg.norm(com[-1] - com[0])),
        SCALE_FLOOR,
    )
    com_acc = second_derivative(com, h)
    com_res = float(np.linalg.norm(com_acc[1:-1], axis=1).max()) * t_f**2 / scale

    pairs = fan_pairs(n) if pairs is None else list(pairs)
    if pairs:
        idx = np.asarray(pairs)
        d = states[:, idx[:, 0]] - states[:, idx[:, 1]]
        dd = second_derivative(d, h)
        par_res = float(np.abs(cross2(d, dd)[1:-1]).max()) * t_f**2 / scale**2
        d12, dd12 = d[:, 0], dd[:, 0]
        mu = (d12 * dd12).sum(-1) / (2.0 * np.maximum((d12**2).sum(-1), SCALE_FLOOR**2))
    else:
        par_res = 0.0
        mu = np.empty(0)

    controls = traj.controls
    if controls is None:
        controls = first_derivative(states, h)
    return PMPDiagnostics(
        costates=-controls,
        mu_estimates=mu,
        com_accel_residual=com_res,
        parallelism_residual=par_res,
    )


def compare(closed_form: PlanSolution, oracle: OracleSolution) -> Comparison:
    """Cost gap (oracle minus closed form, relative) and worst knot deviation."""
    traj = oracle.trajectory
    if traj.n_agents != closed_form.n_agents or not np.isclose(traj.t_f, closed_form.t_f, rtol=1e-12):
        raise MismatchedProblems("agent count or horizon differ")
    reference = sample_trajectory(closed_form, traj.n_samples)
    scale = max(formation_scale(reference.states[0]), SCALE_FLOOR)
    ends = np.abs(reference.states[[0, -1]] - traj.states[[0, -1]]).max()
    if ends > 1e-6 * max(scale, 1.0):
        raise MismatchedProblems("boundary configurations differ")
    dev = float(np.linalg.norm(reference.states - traj.states, axis=-1).max())
    if closed_form.cost > 0:
        gap = (oracle.cost - closed_form.cost) / closed_form.cost
    else:
        gap = oracle.cost
    return Comparison(cost_gap=float(gap), max_deviation=dev, relative_deviation=dev / scale)


def full_rigidity_violation(traj: Trajectory) -> float:
    """Worst drift of *all* pairwise distances, relative to the formation scale."""
    dist = pairwise_distances(traj.states)
    scale = max(float(dist[0].max()), SCALE_FLOOR)
    return float(np.abs(dist - dist[0]).max() / scale)


__all__ = [
    "Comparison",
    "DiscretizedProblem",
    "OracleSolution",
    "PMPDiagnostics",
    "compare",
    "fan_pairs",
    "first_derivative",
    "full_rigidity_violation",
    "pmp_residuals",
    "second_derivative",
    "solve_direct",
]
