import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from rigidplan.planner import BoundaryConditions
from rigidplan.scenarios import bundled_scenario_path

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SQRT3 = math.sqrt(3.0)
EXAMPLE1_INITIAL = np.array([[0.0, 0.0], [0.0, 1.0]])
EXAMPLE1_TERMINAL = np.array([[0.5, 0.0], [1.0, SQRT3 / 2]])
EXAMPLE1_COST = 0.6355  # four decimals as published


@pytest.fixture
def example1():
    return BoundaryConditions(EXAMPLE1_INITIAL, EXAMPLE1_TERMINAL, 1.0)


@pytest.fixture
def example1_path():
    return bundled_scenario_path("example1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def configurations(draw, min_agents=2, max_agents=8, min_separation=1e-3):
    """Configurations whose first agent is well away from the centroid.

    Pairs closer than ``min_separation`` times the coordinate scale are
    rejected: per-pair relative rigidity checks are meaningless below that.
    """
    n = draw(st.integers(min_agents, max_agents))
    pts = np.array(draw(st.lists(st.tuples(coords, coords), min_size=n, max_size=n)))
    rel0 = pts[0] - pts.mean(axis=0)
    scale = max(np.abs(pts).max(), 1.0)
    assume(np.linalg.norm(rel0) > 1e-3 * scale)
    gaps = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + np.eye(n) * scale
    assume(gaps.min() > min_separation * scale)
    return pts


angles = st.floats(-4 * math.pi, 4 * math.pi, allow_nan=False)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in test_acceptance.VERDICTS.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
