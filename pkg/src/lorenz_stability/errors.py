"""Exception hierarchy shared by all modules."""


class LorenzStabilityError(Exception):
    """Base class for every error raised by this package."""


class DiscontinuityError(LorenzStabilityError, ValueError):
    """A map or return time was evaluated exactly at the discontinuity."""


class BranchRangeError(LorenzStabilityError, ValueError):
    """A value lies outside the image of the requested branch."""


class PreconditionError(LorenzStabilityError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class ResourceError(LorenzStabilityError):
    """A request would need an unreasonable amount of memory or time."""


class ConvergenceError(LorenzStabilityError, RuntimeError):
    """An iterative method failed to reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TruncationError(ConvergenceError):
    """A correlation series was not Cauchy at the truncation cap."""


class DegenerateVarianceError(LorenzStabilityError, ValueError):
    """The asymptotic variance vanishes, so no normal law can be compared."""


class BlowUpError(LorenzStabilityError, RuntimeError):
    """ODE integration produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FitError(LorenzStabilityError, RuntimeError):
    """A regression could not be carried out on the supplied data."""


class PropertyViolation(LorenzStabilityError, AssertionError):
    """A numerically checked inequality or monotonicity property failed."""


class ConfigError(LorenzStabilityError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
