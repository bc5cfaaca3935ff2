"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ParameterError(ValueError):
    """A distribution or model parameter set violates its invariants."""


class DegeneracyError(ValueError):
    """Input data is too degenerate for the requested estimate."""


class GridError(ValueError):
    """A density grid is malformed, mismatched, or does not cover the data."""


class DataFormatError(ValueError):
    """An input file does not conform to the documented format."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row
