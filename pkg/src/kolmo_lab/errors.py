"""Exception hierarchy shared by all modules."""


class KolmoError(Exception):
    """Base class for library errors."""


class DomainError(KolmoError, ValueError):
    """Argument outside the domain of an operation."""


class GeometryError(DomainError):
    """Inconsistent cylinder or box geometry."""


class ExponentError(DomainError):
    """Integrability exponent outside the admissible range."""


class KernelError(DomainError):
    """Kernel violates its declared bounds."""


class ConfigValidationError(DomainError):
    """Run configuration failed schema validation."""


class CFLError(KolmoError):
    """Explicit step violates the stability restriction.

    Attributes
    ----------
    suggested_dt : float
        Largest admissible step for the grid at hand.
    """

    def __init__(self, msg, suggested_dt):
        super().__init__(msg)
        self.suggested_dt = suggested_dt


class NumericalError(KolmoError):
    """Numerical failure (NaN, blow-up, singular matrix)."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class PreconditionError(KolmoError):
    """Input does not satisfy the hypothesis of a check."""


class ConstraintError(KolmoError):
    """Discrete constraint violated beyond tolerance."""


class LocalizationError(KolmoError):
    """Truncated domain does not localize the data."""

    def __init__(self, msg, suggested_bounds=None):
        super().__init__(msg)
        self.suggested_bounds = suggested_bounds


class InsufficientResolutionError(KolmoError):
    """Grid too coarse for the requested fit."""


class ConvergenceError(NumericalError):
    """Iteration did not converge; ``report`` holds the last residuals."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report
