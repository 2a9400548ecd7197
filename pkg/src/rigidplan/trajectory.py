from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidSampleCount


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled agent positions and velocities.

    ``states`` and ``controls`` have shape ``(T, N, 2)``; ``controls`` may be
    ``None`` for position-only data (e.g. a CSV without velocity columns).
    """

    times: np.ndarray
    states: np.ndarray
    controls: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise InvalidSampleCount("times must be a non-empty 1-d array")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if times[0] != 0.0:
            raise ValueError("times must start at 0")
        if states.ndim != 3 or states.shape[0] != times.size or states.shape[2] != 2:
            raise ValueError(f"states must have shape ({times.size}, N, 2), got {states.shape}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if self.controls is not None:
            controls = np.asarray(self.controls, dtype=float)
            if controls.shape != states.shape:
                raise ValueError("controls must have the same shape as states")
            object.__setattr__(self, "controls", controls)

    @property
    def n_samples(self) -> int:
        return self.times.size

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]

    @property
    def t_f(self) -> float:
        return float(self.times[-1])

    def com(self) -> np.ndarray:
        """Centre-of-mass path, shape ``(T, 2)``."""
        return self.states.mean(axis=1)
