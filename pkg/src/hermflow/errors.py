"""Exception types shared across the solver."""


class InvalidParameterError(ValueError):
    """A physical or numerical parameter is out of its admissible range."""


class DimensionError(ValueError):
    """Array shapes do not match the frame they are used with."""


class PositivityError(RuntimeError):
    """A relative density dropped below the positivity floor.

    Strict positivity is guaranteed for the exact Galerkin dynamics, so a
    breach signals a discretization failure rather than physics; the solver
    raises instead of clamping silently.
    """

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value


class StepFailureError(RuntimeError):
    """A fixed-point iteration inside a time step failed to contract.

    The contraction constant scales with the step size, so the standard
    remedy is a smaller ``dt``.
    """


class InternalConsistencyError(RuntimeError):
    """A quantity the scheme conserves by construction drifted."""


class ConfigError(ValueError):
    """A run configuration file is malformed."""
