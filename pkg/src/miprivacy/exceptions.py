"""Exception hierarchy shared by every module in the package."""


class MIPrivacyError(ValueError):
    """Base class for all package errors."""


class ValidationError(MIPrivacyError):
    """Input failed a structural check (shape, simplex, positivity)."""


class AbsoluteContinuityViolated(MIPrivacyError):
    """``p_i > 0`` where ``q_i == 0`` in a divergence ``D(p || q)``."""


class NotInterior(ValidationError):
    """A distribution that must lie in the simplex interior has a zero entry."""


class BudgetExceedsEntropy(ValidationError):
    """A leakage budget is larger than the entropy of its hypothesis."""


class NegativeEntry(MIPrivacyError):
    """An assembled mechanism left the probability simplex."""


class NoConvergence(MIPrivacyError):
    """An iterative dual solve hit its iteration cap."""


class NumericalFailure(MIPrivacyError):
    """The SDP interior-point iterations stalled.

    Attributes
    ----------
    diagnostics : dict
        Residuals and iteration count at the point of failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DimensionTooLarge(MIPrivacyError):
    """A brute-force oracle was asked for a problem it cannot enumerate."""
