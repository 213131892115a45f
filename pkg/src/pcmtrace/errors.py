"""Exception hierarchy shared across the package."""


class PcmTraceError(Exception):
    """Base class for all package errors."""


class ContractViolation(PcmTraceError, ValueError):
    """An operation was called outside its precondition (e.g. time going backwards)."""


class ConfigError(PcmTraceError, ValueError):
    """A configuration value is missing, unknown or out of range."""


class ValidationError(PcmTraceError, ValueError):
    """Input data failed validation.

    ``problems`` holds one human readable line per offending entry.
    """

    def __init__(self, message, problems=None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + ":\n  " + "\n  ".join(self.problems)
        super().__init__(message)


class InsufficientDataError(ValidationError):
    """Too few distinct samples to fit a model."""
