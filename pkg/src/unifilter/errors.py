"""Exception types shared across the package."""


class UniFilterError(Exception):
    """Base class for all package errors."""


class GraphFormatError(UniFilterError, ValueError):
    """A graph, label, feature or split file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DimensionError(UniFilterError, ValueError):
    """Array shapes do not agree with the graph or the model."""


class ConfigurationError(UniFilterError, ValueError):
    """A parameter combination cannot be used."""


class NumericalError(UniFilterError, ArithmeticError):
    """A computation left the range where its result is meaningful."""

    def __init__(self, message, hop=None, column=None):
        self.hop = hop
        self.column = column
        super().__init__(message)


class UnreachableTargetError(UniFilterError, ValueError):
    """Label reassignment could not get close enough to a target ratio."""

    def __init__(self, message, closest):
        self.closest = closest
        super().__init__(message)
