"""Exception types raised across the package."""


class EpidmdError(Exception):
    """Base class for all package errors."""


class ConfigError(EpidmdError, ValueError):
    """Invalid user-supplied configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SeriesTooShort(EpidmdError, ValueError):
    pass


class UnknownNode(EpidmdError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptyInput(EpidmdError, ValueError):
    pass


class ParseError(EpidmdError, ValueError):
    """Malformed CSV content; carries 1-based ``row`` and ``column`` when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DimensionMismatch(ParseError):
    pass


class ZeroMatrix(EpidmdError, ValueError):
    pass


class DegenerateEigenproblem(EpidmdError, ArithmeticError):
    pass


class InfectExceedsPopulation(EpidmdError, ValueError):
    pass


class SplitTooSmall(EpidmdError, ValueError):
    pass
