"""Exception types shared across the package.

The CLI maps InputError (and subclasses) to exit code 1 and
TrainingError to exit code 2.
"""


class InputError(ValueError):
    """Caller-supplied data or configuration is invalid."""


class DataLoadError(InputError):
    """A file could not be parsed; the message names the offending row/column."""


class TrainingError(RuntimeError):
    """Model fitting failed (degenerate labels, impossible bootstrap, ...)."""
