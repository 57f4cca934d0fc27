"""Exception hierarchy.

The CLI maps these onto exit codes, so each class carries ``exit_code``.
"""


class RareAugError(Exception):
    exit_code = 1


class ConfigError(RareAugError, ValueError):
    exit_code = 2


class DataError(RareAugError):
    exit_code = 3


class IoError(DataError, OSError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(DataError, ValueError):
    pass


class ShapeError(DataError, ValueError):
    pass


class DomainError(DataError, ValueError):
    pass


class InsufficientMinorityError(DataError, ValueError):
    pass


class TrainingError(RareAugError, RuntimeError):
    exit_code = 5


class NumericalError(TrainingError, ArithmeticError):
    pass


class SelectionError(TrainingError):
    pass
