"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class PushGuideError(Exception):
    exit_code = 1


class ConfigError(PushGuideError, ValueError):
    """Bad configuration text, unknown key, unit mismatch or invariant violation."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelValidityError(PushGuideError):
    """The requested point lies outside the regime where the model applies."""

    exit_code = 3


class NumericalError(PushGuideError, ArithmeticError):
    exit_code = 4


class ModelValidityWarning(UserWarning):
    pass
