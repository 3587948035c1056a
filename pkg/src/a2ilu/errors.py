"""Exception types shared across the package."""


class BreakdownError(ArithmeticError):
    """A pivot or Krylov scalar vanished.

    ``row`` is the row (or iteration) at which the breakdown was detected.
    """

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ZeroDiagonalError(ValueError):
    """The matrix has a zero entry (or no entry) on its main diagonal."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class MatrixMarketError(ValueError):
    """Malformed Matrix Market file."""


class UnsupportedFormatError(MatrixMarketError):
    """Matrix Market file is valid but not coordinate/real."""


class PoleError(ZeroDivisionError):
    """The objective was evaluated at gamma == 0."""


class NumericError(ArithmeticError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ResourceLimitError(MemoryError):
    """A configured size budget would be exceeded."""


class ConfigError(ValueError):
    pass
