"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input (matrix, model, config, file) fails validation."""


class InvariantViolation(RuntimeError):
    """Raised when a numerical invariant breaks mid-run (trace, positivity, norm drift)."""
