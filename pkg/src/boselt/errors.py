"""Exception hierarchy shared by every module."""


class BoseltError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class DomainError(BoseltError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConfigurationError(BoseltError, ValueError):
    """Parameter combination that the requested method does not support."""


class PreconditionError(BoseltError, ValueError):
    """Input violates a stated hypothesis (e.g. a side condition)."""


class ParseError(BoseltError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None, offset=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {offset})" if offset is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.offset = offset


class NumericalError(BoseltError, RuntimeError):
    """An iterative method failed to converge or lost accuracy."""

    exit_code = 2

    def __init__(self, message, **diagnostics):
        if diagnostics:
            detail = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} [{detail}]"
        super().__init__(message)
        self.diagnostics = diagnostics


class OracleFailure(NumericalError):
    """Reference computation could not certify its own result."""


class DegenerateConcentration(PreconditionError):
    """A single grid cell carries too much mass to be split further."""
