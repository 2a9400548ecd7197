"""Closed-form energy-optimal motion of a rigid formation.

With single-integrator agents and cost 1/2 * sum_i |u_i|^2, the formation
energy splits into N |u_c|^2 (translation of the CoM) plus I_c omega^2
(rotation about it).  Both parts are minimised by constant rates, so the plan
is a straight CoM line and a uniform turn.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import InvalidHorizon, InvalidSampleCount, MissingControls, OutOfHorizon
from .geometry import (
    DEFAULT_TOL,
    FormationShape,
    RigidMotion,
    as_configuration,
    congruence_transform,
    extract_shape,
    formation_scale,
    unit,
    unit_perp,
)
from .trajectory import Trajectory


@dataclass(frozen=True, eq=False)
class BoundaryConditions:
    initial: np.ndarray
    terminal: np.ndarray
    t_f: float
    winding: int = 0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "initial", as_configuration(self.initial))
        object.__setattr__(self, "terminal", as_configuration(self.terminal))
        object.__setattr__(self, "t_f", float(self.t_f))
        object.__setattr__(self, "winding", int(self.winding))

    @property
    def n_agents(self) -> int:
        return self.initial.shape[0]


@dataclass(frozen=True, eq=False)
class PlanSolution:
    u_c: np.ndarray
    omega: float
    theta0: float
    r_c0: np.ndarray
    shape: FormationShape
    cost: float
    t_f: float
    motion: RigidMotion

    @property
    def n_agents(self) -> int:
        return self.shape.n_agents

    @property
    def delta_theta(self) -> float:
        """Principal rotation between the boundary poses, in (-pi, pi]."""
        return self.motion.rotation

    @property
    def winding(self) -> int:
        return self.motion.winding

    def com(self, t):
        t = np.asarray(t, dtype=float)
        return self.r_c0 + np.multiply.outer(t, self.u_c)

    def heading(self, t):
        return self.theta0 + self.omega * np.asarray(t, dtype=float)


def reduced_cost(shape: FormationShape, u_c, omega: float, t_f: float) -> float:
    if t_f <= 0:
        raise InvalidHorizon(f"t_f must be positive, got {t_f}")
    u_c = np.asarray(u_c, dtype=float)
    return 0.5 * (shape.n_agents * float(u_c @ u_c) + shape.inertia * omega**2) * t_f


def plan(bc: BoundaryConditions) -> PlanSolution:
    """Optimal rigid motion between the boundary configurations of ``bc``."""
    if not bc.t_f > 0:
        raise InvalidHorizon(f"t_f must be positive, got {bc.t_f}")
    motion = congruence_transform(bc.initial, bc.terminal, bc.tol)
    motion = RigidMotion(motion.translation, motion.rotation, bc.winding)
    n = bc.n_agents
    r_c0 = bc.initial.mean(axis=0)
    collapsed = formation_scale(bc.initial) <= bc.tol * max(1.0, float(np.abs(bc.initial).max()))
    if n == 1 or collapsed:
        # no meaningful heading: pure translation
        shape, theta0, omega = FormationShape.point(n), 0.0, 0.0
    else:
        shape, r_c0, theta0 = extract_shape(bc.initial)
        omega = motion.angle / bc.t_f
    u_c = (bc.terminal.mean(axis=0) - r_c0) / bc.t_f
    cost = reduced_cost(shape, u_c, omega, bc.t_f)
    return PlanSolution(u_c, omega, theta0, r_c0, shape, cost, bc.t_f, motion)


def _controls_at(sol: PlanSolution, t: np.ndarray) -> np.ndarray:
    theta = sol.heading(t)[..., None] + sol.shape.bearings
    return sol.u_c + sol.omega * sol.shape.radii[:, None] * unit_perp(theta)


def agent_controls(sol: PlanSolution, t: float) -> np.ndarray:
    """Velocities of all agents at time ``t``, shape ``(N, 2)``."""
    if not 0.0 <= t <= sol.t_f:
        raise OutOfHorizon(f"t={t} outside [0, {sol.t_f}]")
    return _controls_at(sol, np.float64(t))


def sample_trajectory(sol: PlanSolution, n_samples: int) -> Trajectory:
    if n_samples < 2:
        raise InvalidSampleCount(f"need at least 2 samples, got {n_samples}")
    times = np.linspace(0.0, sol.t_f, int(n_samples))
    theta = sol.heading(times)[:, None] + sol.shape.bearings
    states = sol.com(times)[:, None, :] + sol.shape.radii[:, None] * unit(theta)
    controls = _controls_at(sol, times)
    return Trajectory(times, states, controls)


def evaluate_cost(traj: Trajectory) -> float:
    """Trapezoidal quadrature of 1/2 sum_i |u_i|^2 over the sample grid."""
    if traj.controls is None:
        raise MissingControls("trajectory carries no controls")
    if traj.n_samples < 2:
        raise InvalidSampleCount("need at least 2 samples")
    power = 0.5 * (traj.controls**2).sum(axis=(1, 2))
    return float(trapezoid(power, traj.times))


def control_sum_residual(traj: Trajectory, sol: PlanSolution) -> float:
    """Worst absolute deviation of sum_i u_i(t) from N u_c over the samples."""
    if traj.controls is None:
        raise MissingControls("trajectory carries no controls")
    total = traj.controls.sum(axis=1)
    return float(np.linalg.norm(total - traj.n_agents * sol.u_c, axis=1).max())


def straight_line_trajectory(bc: BoundaryConditions, n_samples: int) -> Trajectory:
    """Each agent on its own straight segment at constant speed (ignores rigidity)."""
    if n_samples < 2:
        raise InvalidSampleCount(f"need at least 2 samples, got {n_samples}")
    times = np.linspace(0.0, bc.t_f, int(n_samples))
    s = (times / bc.t_f)[:, None, None]
    states = (1 - s) * bc.initial + s * bc.terminal
    controls = np.broadcast_to((bc.terminal - bc.initial) / bc.t_f, states.shape)
    return Trajectory(times, states, controls)


__all__ = [
    "BoundaryConditions",
    "PlanSolution",
    "agent_controls",
    "control_sum_residual",
    "evaluate_cost",
    "plan",
    "reduced_cost",
    "sample_trajectory",
    "straight_line_trajectory",
]
