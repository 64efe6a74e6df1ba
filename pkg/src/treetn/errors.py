"""Exception types shared across the package."""


class TreetnError(Exception):
    """Base class for all package-specific errors."""


class LoadError(TreetnError):
    """Raised when a configuration or data file cannot be parsed."""


class InvariantViolation(TreetnError):
    """Raised when an internal structural contract is broken."""


class NumericalError(TreetnError):
    """Raised when a computation produces non-finite or invalid values."""
