"""Exception types shared across the package.

The CLI maps each family to a fixed exit code, so new error types should
subclass one of these rather than ``Exception`` directly.
"""


class HorizonError(Exception):
    exit_code = 1


class ConfigError(HorizonError, ValueError):
    """Bad configuration text or invalid parameter combination."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ShapeError(HorizonError, ValueError):
    exit_code = 2


class ProtocolError(HorizonError, RuntimeError):
    """An operation was invoked in a state where it is not allowed."""

    exit_code = 3


class IncompleteTraceError(ProtocolError):
    pass


class HorizonRangeError(HorizonError, ValueError):
    """A requested temporal coordinate jump leaves the trained horizon."""

    exit_code = 4
