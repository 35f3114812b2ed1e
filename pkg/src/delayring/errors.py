"""Exception types shared across the package."""


class DelayRingError(Exception):
    """Base class for all package errors."""


class InvalidStateError(DelayRingError, ValueError):
    """A state or parameter violates a model precondition (e.g. r <= 0)."""


class ConvergenceError(DelayRingError, RuntimeError):
    """An iterative solver did not reach its tolerance within budget."""

    def __init__(self, message, *, last=None, residual=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class SingularJacobianError(ConvergenceError):
    """Newton hit a (numerically) rank-deficient Jacobian.

    Usually means the point sits on a fold or branch point; use the
    continuation machinery there instead of plain Newton.
    """


class BranchSwitchError(DelayRingError):
    """Branch switching fell back onto the parent branch."""


class SimulationError(DelayRingError, RuntimeError):
    """Time integration left the model's validity region."""


class PeakDetectionError(DelayRingError, ValueError):
    """Too few maxima to reconstruct a phase."""
