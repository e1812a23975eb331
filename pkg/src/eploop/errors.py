"""Exception types raised across the package."""


class EploopError(Exception):
    """Base class for all package errors."""


class DomainError(EploopError):
    """An argument is outside the domain an operation is defined on."""


class SingularityError(EploopError):
    """A loop passes too close to the exceptional point for the
    adiabatic frame to be meaningful."""


class RefinementError(EploopError):
    """Branch tracking could not be resolved within the maximum
    grid-refinement depth."""


class ConsistencyError(EploopError):
    """Objects built for different loops or frames were combined."""


class IntegrationError(EploopError):
    """The adaptive integrator failed (step-size underflow)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class QuadratureError(EploopError):
    """An adaptive quadrature did not converge."""


class DegenerateInputError(EploopError):
    """An input is degenerate (e.g. a zero column where a normalized
    probability is requested)."""


class RankError(EploopError):
    """The control linear system has no usable singular values."""


class SchemaError(EploopError):
    """A config or CSV file does not conform to the documented schema."""
