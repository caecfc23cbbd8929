"""Exception types shared across the package.

DataError subclasses ValueError so library callers can catch either; the CLI
maps DataError to exit code 2 and TrainingError to exit code 3.
"""


class MbklError(Exception):
    """Base class for errors raised by this package."""


class DataError(MbklError, ValueError):
    """Malformed input data, file, or argument value."""


class TrainingError(MbklError, RuntimeError):
    """Training cannot produce a usable model (e.g. empty stump bank)."""
