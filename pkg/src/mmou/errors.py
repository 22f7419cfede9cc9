"""Exception hierarchy shared by all engines."""


class MmouError(Exception):
    """Base class for all library errors."""


class DimensionError(MmouError, ValueError):
    """Array shapes are inconsistent (non-square matrix, mismatched vector)."""


class DomainError(MmouError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class StructureError(MmouError, ValueError):
    """A generator matrix violates a structural requirement (e.g. reducible)."""


class SingularMatrixError(MmouError):
    """A linear system is singular or numerically near-singular."""


class AccuracyError(MmouError):
    """Requested accuracy not reached; carries the best available estimate."""

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class ApplicabilityError(MmouError, ValueError):
    """The operation's special-case assumptions do not hold for the input."""


class StabilityError(MmouError, ValueError):
    """A discretization step size violates the stability bound."""


class TransformOverflowError(MmouError):
    """A transform evaluation would overflow; carries the offending cell."""

    def __init__(self, theta, t):
        super().__init__(
            f"transform exponent overflow at (theta={theta!r}, t={t!r}); "
            "shrink the theta grid"
        )
        self.theta = theta
        self.t = t


class SizeError(MmouError, ValueError):
    """Problem size exceeds the desk-scale guard."""


class ConfigError(MmouError, ValueError):
    """Configuration file is malformed or violates a model invariant."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
