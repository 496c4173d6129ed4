"""Exception types shared by the solvers and the certifier."""


class QuadtimeError(Exception):
    """Base class for all errors raised by this package."""


class StepRejected(QuadtimeError):
    """A time step violated a stability or CFL bound.

    Carries the largest admissible step so callers can retry.
    """

    def __init__(self, message, admissible):
        super().__init__(message)
        self.admissible = float(admissible)


class IterationLimit(QuadtimeError):
    """An iterative solve failed to converge; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class NumericalBlowup(QuadtimeError):
    """Non-finite values appeared during a run; names the offending step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateCurve(QuadtimeError):
    """A curve node lost its tangent (|dX/ds| ~ 0); names the node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class StateInvalid(QuadtimeError):
    """A state violated a structural invariant (e.g. superluminal velocity)."""


class ResolvabilityError(QuadtimeError):
    """Requested grid/kernel combination cannot resolve the data."""


class InvalidTrial(QuadtimeError):
    """A certifier trial violates its normalization constraints."""


class InvalidParams(QuadtimeError):
    """Certificate parameters outside their validity range."""


class GridMismatch(QuadtimeError):
    """Two fields or trajectories live on incompatible grids."""


class ConfigError(QuadtimeError):
    """An experiment configuration failed validation."""
