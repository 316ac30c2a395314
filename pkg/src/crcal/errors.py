"""Exception types shared across the package.

The CLI maps each class to a one-line machine-parsable error category.
"""


class CrcalError(Exception):
    """Base class for package errors."""

    category = "error"


class ConfigError(CrcalError):
    """Malformed or inconsistent experiment configuration."""

    category = "config-error"


class DataError(CrcalError):
    """Dataset loading or generation failure."""

    category = "data-error"


class RunError(CrcalError):
    """A phase of an experiment run failed.

    Carries the phase name and the acquisition round index so the caller
    can report exactly where the loop aborted.
    """

    category = "run-error"

    def __init__(self, message, phase=None, round_index=None):
        if phase is not None:
            message = f"{message} (phase={phase}, round={round_index})"
        super().__init__(message)
        self.phase = phase
        self.round_index = round_index


class CadenceError(CrcalError):
    """Trace rows are not at step-level cadence where one is required."""

    category = "run-error"


class EigenError(CrcalError):
    """Eigensolver received invalid input or failed to converge."""

    category = "run-error"
