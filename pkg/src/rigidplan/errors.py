"""Exception hierarchy for the rigid-formation planner."""


class RigidPlanError(ValueError):
    """Base class for every planner-level failure."""


class DegenerateHeading(RigidPlanError):
    """Agent 1 coincides with the centre of mass, so no heading is defined."""


class NotCongruent(RigidPlanError):
    """Boundary configurations are not related by any rigid motion."""


class ReflectionRequired(NotCongruent):
    """Boundary configurations are mirror images; no proper motion maps one to the other."""


class InvalidN(RigidPlanError):
    pass


class InvalidHorizon(RigidPlanError):
    pass


class OutOfHorizon(RigidPlanError):
    pass


class InvalidSampleCount(RigidPlanError):
    pass


class MissingControls(RigidPlanError):
    pass


class NotConverged(RigidPlanError):
    """Raised on request when the direct solver stops before meeting its tolerances."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class NonUniformGrid(RigidPlanError):
    pass


class TooFewSamples(RigidPlanError):
    pass


class MismatchedProblems(RigidPlanError):
    pass


class ScenarioError(RigidPlanError):
    """Malformed scenario document."""
