"""Exception types shared across the package."""


class ProbewalkError(Exception):
    """Base class for all package errors."""


class ConfigError(ProbewalkError):
    """A config document failed to parse or is missing required keys."""


class ModelValidationError(ProbewalkError):
    """A model invariant is violated; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class JointLimitError(ProbewalkError):
    """A joint angle is outside its configured range."""

    def __init__(self, joint, value, lo, hi):
        self.joint = joint
        self.value = value
        super().__init__(
            f"joint {joint!r} = {value:.6f} rad outside range [{lo:.6f}, {hi:.6f}]"
        )


class WorkspaceError(ProbewalkError):
    """An IK target is outside the reachable workspace.

    ``shortfall`` is the distance (m) by which the target misses the
    admissible hip-to-ankle band.
    """

    def __init__(self, shortfall, message="target outside reachable workspace"):
        self.shortfall = float(shortfall)
        super().__init__(f"{message} (shortfall {self.shortfall:.6f} m)")


class OracleFailure(ProbewalkError):
    """The numeric IK oracle failed to converge."""


class PlanningError(ProbewalkError):
    """Gait planning failed (infeasible parameters or a singular system)."""


class InfeasiblePlanError(PlanningError):
    """A planned trajectory violates a joint limit/speed bound at ``tick``."""

    def __init__(self, tick, message):
        self.tick = tick
        super().__init__(f"tick {tick}: {message}")


class DynamicInfeasibilityError(ProbewalkError):
    """ZMP undefined: total vertical contact force surrogate is non-positive."""


class ContactViolationError(ProbewalkError):
    """The sole interpenetrates the terrain beyond the integrity tolerance."""


class ControllerFaultError(ProbewalkError):
    """Non-finite values reached the adaptation controller."""


class StepFailureError(ProbewalkError):
    """Settled contact was not reached within the allowed SS extension."""
