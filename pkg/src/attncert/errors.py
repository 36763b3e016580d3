"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition."""


class CertificationInfeasibleError(RuntimeError):
    """Raised when the certified path saturates and cannot produce a valid bound."""


class InternalInvariantError(AssertionError):
    """Raised when a cross-check between two independent code paths disagrees."""
