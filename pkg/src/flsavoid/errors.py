"""Exception types raised across the package."""


class LayoutError(ValueError):
    """Beam layout is malformed (non-monotone edges, no bins, bad topology)."""


class CellLookupError(IndexError):
    """A cell index does not address a cell of the map."""


class DegenerateUpdateError(ArithmeticError):
    """Both measurement likelihoods vanish for a cell being updated."""


class ConfigurationError(ValueError):
    """A configuration value is missing, unknown or out of range."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class AlignmentError(ValueError):
    """Ping data does not line up with the map layout."""


class DecisionError(RuntimeError):
    """No action has a finite risk."""


class LogFormatError(ValueError):
    """A record in a ping/nav/trace log could not be parsed."""

    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        super().__init__(where + message)
        self.lineno = lineno
        self.path = path
