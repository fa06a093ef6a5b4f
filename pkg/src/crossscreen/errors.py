class InputError(ValueError):
    """Bad arguments or data supplied by the caller."""


class ParseError(InputError):
    """Malformed input file."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ExactMethodError(InputError):
    """Exact null distribution is out of reach; use the normal approximation."""
