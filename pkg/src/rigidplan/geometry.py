"""Planar rigid formations in agent coordinates and in (CoM, heading) coordinates.

A configuration is an ``(N, 2)`` float array of agent positions.  A formation
shape stores each agent's distance ``l_i`` from the centre of mass and its
bearing ``alpha_i`` relative to agent 1, so that

    r_i = r_c + l_i * s(alpha_i + theta),   s(a) = (cos a, sin a).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateHeading,
    InvalidN,
    InvalidSampleCount,
    NotCongruent,
    ReflectionRequired,
)
from .trajectory import Trajectory

DEFAULT_TOL = 1e-9
HEADING_TOL = 1e-12
SCALE_FLOOR = 1e-12


def as_configuration(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"configuration must be an (N, 2) array with N >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("configuration contains non-finite coordinates")
    return arr


def wrap_angle(angle):
    """Map angles into (-pi, pi]; +pi is kept as +pi."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2 * np.pi)


def unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def unit_perp(theta):
    # +90 deg rotation of unit(theta), so d/dt unit(theta(t)) = omega * unit_perp(theta(t))
    theta = np.asarray(theta, dtype=float)
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cross2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def center_of_mass(config) -> np.ndarray:
    return as_configuration(config).mean(axis=0)


def formation_scale(config) -> float:
    """Largest pairwise distance (0 for a single agent or a collapsed formation)."""
    config = as_configuration(config)
    if config.shape[0] < 2:
        return 0.0
    diff = config[:, None, :] - config[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def pairwise_distances(config) -> np.ndarray:
    config = np.asarray(config, dtype=float)
    diff = config[..., :, None, :] - config[..., None, :, :]
    return np.sqrt((diff**2).sum(-1))


@dataclass(frozen=True, eq=False)
class FormationShape:
    """Intrinsic description of a rigid planar formation about its centre of mass."""

    radii: np.ndarray
    bearings: np.ndarray

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        bearings = np.asarray(self.bearings, dtype=float).reshape(-1)
        if radii.size < 1 or radii.shape != bearings.shape:
            raise ValueError("radii and bearings must be non-empty and of equal length")
        if np.any(radii < 0) or not np.all(np.isfinite(radii)) or not np.all(np.isfinite(bearings)):
            raise ValueError("radii must be finite and non-negative, bearings finite")
        if bearings[0] != 0.0:
            raise ValueError("bearing of agent 1 must be exactly 0")
        lmax = radii.max()
        offset = (radii[:, None] * unit(bearings)).sum(axis=0)
        if np.linalg.norm(offset) > 1e-9 * lmax:
            raise ValueError("shape is not centred on its centre of mass")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "bearings", bearings)

    @classmethod
    def point(cls, n_agents: int) -> "FormationShape":
        """All agents stacked on the centre of mass."""
        return cls(np.zeros(n_agents), np.zeros(n_agents))

    @property
    def n_agents(self) -> int:
        return self.radii.size

    @property
    def inertia(self) -> float:
        """Moment of inertia about the CoM with unit masses."""
        return float(np.sum(self.radii**2))

    def offsets(self, theta: float = 0.0) -> np.ndarray:
        return self.radii[:, None] * unit(self.bearings + theta)


def extract_shape(config, tol: float = HEADING_TOL):
    """Split a configuration into ``(shape, r_c, theta0)``.

    ``theta0`` is the bearing of agent 1 seen from the centroid.  Raises
    :class:`DegenerateHeading` when agent 1 sits on the centroid, judged
    against ``tol`` times the coordinate magnitude.
    """
    config = as_configuration(config)
    r_c = config.mean(axis=0)
    rel = config - r_c
    radii = np.hypot(rel[:, 0], rel[:, 1])
    n = config.shape[0]
    if n == 1:
        return FormationShape(np.zeros(1), np.zeros(1)), r_c, 0.0
    magnitude = max(float(np.abs(config).max()), float(radii.max()), 1.0)
    if radii[0] <= tol * magnitude:
        raise DegenerateHeading(
            f"agent 1 is within {radii[0]:.3g} of the centre of mass; heading undefined"
        )
    theta0 = math.atan2(rel[0, 1], rel[0, 0])
    bearings = wrap_angle(np.arctan2(rel[:, 1], rel[:, 0]) - theta0)
    bearings[0] = 0.0
    bearings[radii == 0.0] = 0.0
    return FormationShape(radii, bearings), r_c, theta0


def reconstruct_positions(shape: FormationShape, r_c, theta: float) -> np.ndarray:
    return np.asarray(r_c, dtype=float) + shape.offsets(theta)


@dataclass(frozen=True)
class RigidMotion:
    """Rotation about the formation's centroid followed by a translation of the centroid.

    The applied angle is ``rotation + 2*pi*winding``; only that total matters
    for the planner's angular velocity, the pose it lands on ignores winding.
    """

    translation: tuple
    rotation: float
    winding: int = 0

    @property
    def angle(self) -> float:
        return self.rotation + 2 * math.pi * self.winding

    def apply(self, config) -> np.ndarray:
        config = as_configuration(config)
        c = config.mean(axis=0)
        return c + np.asarray(self.translation) + (config - c) @ rotation_matrix(self.rotation).T


def _best_rotation(p: np.ndarray, q: np.ndarray):
    angle = float(wrap_angle(math.atan2(cross2(p, q).sum(), (p * q).sum())))
    residual = float(np.linalg.norm(p @ rotation_matrix(angle).T - q, axis=1).max())
    return angle, residual


def congruence_transform(initial, terminal, tol: float = DEFAULT_TOL) -> RigidMotion:
    """Proper rigid motion taking ``initial`` onto ``terminal``.

    Uses the closed-form planar Procrustes angle on centred points.  The
    post-alignment residual must be within ``tol`` times the formation scale.
    """
    initial = as_configuration(initial)
    terminal = as_configuration(terminal)
    if initial.shape != terminal.shape:
        raise NotCongruent(
            f"agent count differs: {initial.shape[0]} initial vs {terminal.shape[0]} terminal"
        )
    c0 = initial.mean(axis=0)
    c1 = terminal.mean(axis=0)
    p = initial - c0
    q = terminal - c1
    scale = max(formation_scale(initial), formation_scale(terminal), SCALE_FLOOR)
    angle, residual = _best_rotation(p, q)
    if residual > tol * scale:
        flip = np.array([1.0, -1.0])
        _, mirrored = _best_rotation(p * flip, q)
        if mirrored <= tol * scale:
            raise ReflectionRequired(
                "terminal formation is a reflection of the initial one; "
                "a planar rigid motion cannot realise a reflection"
            )
        raise NotCongruent(
            f"formations differ: residual {residual / scale:.3g} (relative) exceeds tol {tol:.3g}"
        )
    return RigidMotion(translation=tuple(c1 - c0), rotation=angle, winding=0)


def rigidity_residual(traj: Trajectory, scale_floor: float = SCALE_FLOOR) -> float:
    """Worst relative drift of any pairwise distance from its value at t=0."""
    states = traj.states
    if states.shape[0] < 2:
        raise InvalidSampleCount("rigidity_residual needs at least 2 samples")
    if states.shape[1] < 2:
        return 0.0
    dist = pairwise_distances(states)
    ref = dist[0]
    return float((np.abs(dist - ref) / np.maximum(ref, scale_floor)).max())


def constraint_count(n: int) -> int:
    """Minimum number of distance constraints making ``n`` planar points rigid."""
    if int(n) != n or n < 2:
        raise InvalidN(f"need at least 2 agents, got {n}")
    return 2 * int(n) - 3


def rotational_coefficient(shape: FormationShape) -> float:
    """Coefficient of omega**2 in the reduced energy, written over agents 1..N-1.

    The last agent is eliminated through the centroid condition, which turns
    its contribution into the double sum over the remaining agents.
    """
    l = shape.radii[:-1]
    a = shape.bearings[:-1]
    double = np.sum(np.outer(l, l) * np.cos(a[:, None] - a[None, :]))
    return float(np.sum(l**2) + double)
