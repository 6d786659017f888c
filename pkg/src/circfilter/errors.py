"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class NumericalError(ArithmeticError):
    """A computation produced a result that cannot be trusted."""


class ConditioningError(NumericalError):
    """A Fisher matrix is too badly conditioned to solve against."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class DegeneracyError(NumericalError):
    """All particle weights collapsed (non-finite log-weights)."""


class QuadratureOverflowError(NumericalError):
    """The unnormalized density overflowed even after stabilization."""
