"""Exception hierarchy shared across the pipeline.

Each class maps to a distinct CLI exit code (see cli.py).
"""


class LogformerError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(LogformerError):
    """Bad configuration: unknown keys, invalid values, fingerprint mismatch."""


class DataError(LogformerError):
    """Bad input data: empty lines, missing labels, malformed files."""


class CorruptionError(LogformerError):
    """Internal consistency violation: param-count mismatch, bad checkpoint."""
