"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class SpikewattError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(SpikewattError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class ShapeError(SpikewattError, ValueError):
    """Array shapes or lengths disagree."""


class ConfigError(SpikewattError, ValueError):
    """A configuration or profile violates one of its invariants."""


class IncompleteInputError(SpikewattError, ValueError):
    """A physical quantity is missing and no override supplies it."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ParseError(SpikewattError):
    """Input text does not follow the documented schema."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
