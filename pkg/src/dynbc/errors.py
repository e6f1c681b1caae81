"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument violates a documented precondition (sign, range, grid match)."""


class NumericalError(RuntimeError):
    """A computation produced values outside its guaranteed regime."""


class SolverFailure(NumericalError):
    """The fixed-point construction could not be completed.

    Carries partial results so callers can persist diagnostics.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
