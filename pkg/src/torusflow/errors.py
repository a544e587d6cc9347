"""Exception types shared across the package."""


class TorusflowError(Exception):
    """Base class for package errors."""


class ValidationError(TorusflowError):
    """Malformed or inadmissible input (bad matrices, broken invariants, bad files)."""


class NumericalError(TorusflowError):
    """A computation failed or degenerated (blow-up, singular metric, no spectral gap)."""
