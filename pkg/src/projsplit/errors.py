"""Exception hierarchy shared across the solver."""


class ProjSplitError(Exception):
    """Base class for all solver errors."""


class DimensionError(ProjSplitError, ValueError):
    """Vector or map dimensions do not agree."""


class CapabilityError(ProjSplitError, TypeError):
    """An operator was asked for an evaluation it does not support."""


class ParameterError(ProjSplitError, ValueError):
    """A numeric parameter is outside its admissible range."""


class NumericalError(ProjSplitError, RuntimeError):
    """An inner numerical procedure failed to meet its contract."""


class InexactnessError(NumericalError):
    """CG could not satisfy the relative error criteria within its budget.

    The best iterate found is attached so a caller can inspect it or retry with
    a larger budget.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BacktrackError(NumericalError):
    """Backtracking exceeded its hard cap on halvings."""


class ConfigError(ProjSplitError, ValueError):
    """An experiment description is malformed or inconsistent."""


class DataError(ProjSplitError, ValueError):
    """A dataset file could not be read or has the wrong shape."""
