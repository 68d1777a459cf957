"""Exception types shared across the package.

The CLI maps each class to a distinct process exit code.
"""


class MimlError(Exception):
    """Base class for all package errors."""


class ConfigError(MimlError, ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(MimlError, ValueError):
    """Malformed, inconsistent or unusable input data."""


class ConvergenceError(MimlError, RuntimeError):
    """A numerical routine failed to produce a usable result."""


class LeakageError(MimlError, AssertionError):
    """Training-only information reached an evaluation fold."""
