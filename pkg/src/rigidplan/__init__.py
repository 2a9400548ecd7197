"""Energy-optimal motion planning for rigid planar formations."""
from .errors import *  # noqa: F401,F403
from .geometry import (
    FormationShape,
    RigidMotion,
    center_of_mass,
    congruence_transform,
    constraint_count,
    extract_shape,
    reconstruct_positions,
    rigidity_residual,
    rotational_coefficient,
)
from .oracle import DiscretizedProblem, OracleSolution, PMPDiagnostics, compare, pmp_residuals, solve_direct
from .planner import (
    BoundaryConditions,
    PlanSolution,
    agent_controls,
    evaluate_cost,
    plan,
    reduced_cost,
    sample_trajectory,
)
from .trajectory import Trajectory

__version__ = "0.1.0"
