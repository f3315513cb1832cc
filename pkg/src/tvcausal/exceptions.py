"""Exception hierarchy used across the package."""


class TVCausalError(Exception):
    """Base class for all package errors."""


class InvalidInputError(TVCausalError, ValueError):
    pass


class InvalidModelError(TVCausalError, ValueError):
    pass


class InvalidConfigError(TVCausalError, ValueError):
    pass


class InvalidHyperparameterError(TVCausalError, ValueError):
    pass


class NonstationaryError(TVCausalError, ValueError):
    pass


class DegenerateWeightsError(TVCausalError, RuntimeError):
    """All importance weights vanished at time index ``t``."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"all particle weights are zero at t={t}")


class SingularUpdateError(TVCausalError, RuntimeError):
    pass


class DegenerateTestError(TVCausalError, ValueError):
    pass


class ParseError(TVCausalError, ValueError):
    """CSV parsing failure; ``row`` and ``column`` are 1-based when known."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
