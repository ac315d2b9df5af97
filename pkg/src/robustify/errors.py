"""Exception types shared across the package."""


class RobustifyError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(RobustifyError, ValueError):
    """A parameter lies outside its family's domain."""


class InvalidDataError(RobustifyError, ValueError):
    """A datum lies outside the family's support.

    ``index`` identifies the offending element when the input was a sequence.
    """

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)
        self.index = index


class EmptyDataError(RobustifyError, ValueError):
    """An operation that needs at least one datum received none."""


class ConvergenceError(RobustifyError, RuntimeError):
    """An iterative fit failed to converge; carries the objective trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class RankDeficientError(RobustifyError, ValueError):
    """The design matrix is rank deficient; names the collinear columns."""

    def __init__(self, columns):
        self.columns = list(columns)
        cols = ", ".join(str(c) for c in self.columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {cols}")


class DataFormatError(RobustifyError, ValueError):
    """A file could not be parsed; carries the line number and byte offset."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset
