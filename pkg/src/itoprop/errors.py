"""Exception types raised by the propagation library."""


class PropagationError(Exception):
    """Base class for numerical failures during propagation."""


class DimensionError(ValueError):
    """State vector does not match the representation of a model."""


class SeriesConvergenceError(PropagationError):
    """A Chebychev series did not reach the requested tolerance."""

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class InsufficientSamplesError(SeriesConvergenceError):
    """The inhomogeneity needs more sampling points than were supplied (N_t < m)."""


class BoundsViolationError(PropagationError):
    """Chebychev recurrence diverged, the spectrum is not inside the assumed bounds."""


class OrderLimitError(PropagationError):
    """Expansion order beyond the numerically safe range."""


class IterationError(PropagationError):
    """Time-ordering iteration did not converge within the allowed number of steps."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureError(PropagationError):
    """Oracle quadrature did not converge."""
