"""Exception types raised by the simulator."""


class PoleEvaluationError(ValueError):
    """A normalized continuum quantity was requested at a complex pole."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class CompletenessError(RuntimeError):
    """The argument-principle count disagrees with the roots that were found."""

    def __init__(self, message, rect=None):
        super().__init__(message)
        self.rect = rect


class BoundaryZeroError(RuntimeError):
    """A zero is suspected on (or extremely close to) a counting contour."""


class BranchAmbiguityError(RuntimeError):
    """Two square-root branch choices disagree in a physical quantity."""


class TailConvergenceError(RuntimeError):
    """A truncated integral tail is larger than the requested tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class MissedRootError(RuntimeError):
    """Box quantization found a spacing anomaly that suggests a missing root."""


class TrajectoryRangeError(ValueError):
    """A retarded time falls outside the stored trajectory."""


class WindowTooShortError(ValueError):
    """A fit window is too short for the requested classification."""


class ConfigError(ValueError):
    """Invalid scenario configuration."""
