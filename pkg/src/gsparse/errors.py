"""Exception types raised across the package."""


class GsparseError(Exception):
    """Base class for all package errors."""


class NumericsError(GsparseError):
    pass


class DictionaryError(GsparseError):
    pass


class GroupError(GsparseError):
    """Invalid group structure; ``violations`` lists human-readable problems."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SolverError(GsparseError):
    pass


class SimulationError(GsparseError):
    """Raised when an integrator produces a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class PreprocessError(GsparseError):
    pass


class ConfigError(GsparseError):
    pass
