"""Shared exception and warning types."""


class NumericError(RuntimeError):
    """A linear-algebra or floating-point step failed or went out of range."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class SnapshotFormatError(ValueError):
    """A snapshot container file could not be parsed."""


class DegenerateDataWarning(UserWarning):
    """Data contained zero magnitudes where a normalization was requested."""
