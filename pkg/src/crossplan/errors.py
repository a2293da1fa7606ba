"""Exception types shared across the planner."""


class PlanningError(Exception):
    """Base class for all planner errors."""


class PositionOutOfCorridor(PlanningError):
    """Position is too far from every segment of the centerline."""


class SOutOfRange(PlanningError):
    """Arc length outside the route's parametrization."""


class NonPositiveGap(PlanningError):
    """A leading vehicle was given with a non-positive gap."""


class HorizonMismatch(PlanningError):
    """Leader trajectory does not cover the requested rollout horizon."""


class NoCandidateRoute(PlanningError):
    """No route corridor contains the vehicle."""


class NoEgoRoute(PlanningError):
    """The ego vehicle cannot be projected onto its route."""


class LengthMismatch(PlanningError):
    """Two trajectories that must share a grid do not."""


class TooShort(PlanningError):
    """Trajectory too short for the finite-difference stencils."""


class NoOption(PlanningError):
    """The arbiter was given an empty option list."""


class ScenarioError(PlanningError):
    """Scenario file is malformed or inconsistent."""
