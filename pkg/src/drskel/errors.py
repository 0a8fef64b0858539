"""Exception types shared across the package."""


class DrskelError(Exception):
    """Base class for all package errors."""


class NetworkFormatError(DrskelError):
    """A network or dataset file could not be parsed."""


class InvariantError(DrskelError):
    """A domain object violates one of its structural invariants."""


class DimensionError(DrskelError):
    """Array shapes are inconsistent with the declared cardinalities."""


class SingularHessianError(DrskelError):
    """The restricted cross-moment matrix is numerically singular.

    Carries the offending minimum eigenvalue so callers can report it.
    """

    def __init__(self, message: str, lambda_min: float):
        super().__init__(message)
        self.lambda_min = lambda_min


class StateSpaceTooLargeError(DrskelError):
    """Exhaustive enumeration was requested for too many joint states."""


class DivergenceError(DrskelError):
    """An iterative solver produced non-finite or exploding objectives."""
