class PumpscopeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PumpscopeError):
    """Bad arguments, configuration or preconditions (CLI exit code 1)."""


class DataError(PumpscopeError):
    """Malformed or inconsistent input data (CLI exit code 2)."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class MarketGapError(DataError):
    """Market data does not cover a required time range."""


class UnpricedAttemptError(ValidationError):
    """A pump attempt carries no usable target price."""
