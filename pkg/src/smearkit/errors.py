"""Exception types shared across the package."""


class SmearkitError(Exception):
    """Base class for package errors."""


class DataError(SmearkitError):
    """Invalid input data: malformed files, schema violations, misaligned inputs."""


class NumericError(SmearkitError):
    """Numeric failure during computation (NaN/Inf loss, divergence)."""
