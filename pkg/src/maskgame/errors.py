"""Exception hierarchy."""


class MaskGameError(Exception):
    """Base class for all package errors."""


class SchemaError(MaskGameError, ValueError):
    """Malformed game description or mismatched vector lengths."""


class DomainError(MaskGameError, ValueError):
    """A quantity is undefined for the given input (e.g. zero-probability observation)."""


class CapacityError(MaskGameError):
    """The exact path would exceed the enumeration cap."""


class ConfigurationError(MaskGameError, ValueError):
    """Invalid generator or solver configuration."""


class SolverError(MaskGameError):
    """The LP backend failed (infeasible, unbounded, or numerically stuck)."""


class IterationLimitError(SolverError):
    """Constraint generation did not converge within ``max_rounds``."""

    def __init__(self, message, gap):
        super().__init__(message)
        self.gap = gap


class TrainingError(MaskGameError):
    """Non-finite loss during GAM training."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
