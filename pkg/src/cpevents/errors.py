"""Exception hierarchy.

Each error class carries the process exit code the CLI maps it to:
1 for configuration problems, 2 for data problems, 3 for numerical ones.
"""


class CPEventsError(Exception):
    exit_code = 2


class ConfigError(CPEventsError):
    exit_code = 1


class DataError(CPEventsError):
    exit_code = 2


class FormatError(DataError):
    """Input text does not follow the declared layout."""


class EmptySnapshotError(DataError):
    """A snapshot stream produced no valid route lines."""


class EmptyPeerSetError(DataError):
    """Country filtering left no routes in a snapshot."""


class NumericalError(CPEventsError):
    exit_code = 3


class ZeroVarianceError(NumericalError):
    pass


class DegenerateRangeError(NumericalError):
    pass


class FitError(NumericalError):
    """ARIMA fitting failed; ``diagnostics`` holds the best state reached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StageError(CPEventsError):
    """Wraps a failure inside one pipeline stage."""

    def __init__(self, stage, cause, date=None):
        where = f" at {date.isoformat()}" if date is not None else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")
        self.stage = stage
        self.cause = cause
        self.date = date
        self.exit_code = getattr(cause, "exit_code", 2)
