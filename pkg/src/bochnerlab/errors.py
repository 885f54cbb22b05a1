"""Exception types raised across the toolkit."""


class BochnerLabError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatchError(BochnerLabError, ValueError):
    pass


class SingularJetError(BochnerLabError, ArithmeticError):
    """A jet operation was asked to divide by zero or leave its domain."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class InsufficientOrderError(BochnerLabError, ValueError):
    pass


class MetricDefinitenessError(BochnerLabError, ValueError):
    def __init__(self, message, smallest_minor=None):
        super().__init__(message)
        self.smallest_minor = smallest_minor


class GenerationError(BochnerLabError, RuntimeError):
    pass


class DegenerateSlicingError(BochnerLabError, ValueError):
    pass


class FrameError(BochnerLabError, ValueError):
    pass


class PreconditionError(BochnerLabError, ValueError):
    pass


class SolverError(BochnerLabError, RuntimeError):
    pass


class TopologyError(BochnerLabError, RuntimeError):
    pass


class ConfigError(BochnerLabError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
