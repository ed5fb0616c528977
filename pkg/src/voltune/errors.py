"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DataError(ValueError):
    """Input data (e.g. an ingested CSV) is malformed or irregular."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []


class InternalError(RuntimeError):
    """An internal invariant was violated. Indicates a bug."""
