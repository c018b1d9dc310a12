class FluctSpdError(Exception):
    """Base class for errors raised by fluctspd."""


class ConfigError(FluctSpdError, ValueError):
    """Invalid or unknown configuration keys/values."""


class QuadratureError(FluctSpdError):
    """An adaptive integral did not reach its tolerance.

    Carries the achieved estimate and error bound.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SingularKernelError(FluctSpdError):
    """A response kernel or linear system is singular at the given (Q, omega)."""

    def __init__(self, message, Q=None, omega=None):
        super().__init__(message)
        self.Q = Q
        self.omega = omega


class ConvergenceError(FluctSpdError):
    """Iteration (SCF, root bracketing) failed to converge."""
