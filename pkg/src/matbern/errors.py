"""Exception hierarchy for matbern."""


class MatBernError(Exception):
    """Base class for all library errors."""


class AsymmetryError(MatBernError, ValueError):
    pass


class NonFiniteError(MatBernError, ValueError):
    pass


class ConvergenceError(MatBernError, ArithmeticError):
    pass


class DomainError(MatBernError, ValueError):
    pass


class DimMismatchError(MatBernError, ValueError):
    pass


class EmptySampleError(MatBernError, ValueError):
    pass


class SampleTooSmall(EmptySampleError):
    pass


class WeightError(MatBernError, ValueError):
    pass


class BoundednessError(MatBernError, ValueError):
    """Raised when observations leave the declared eigenvalue interval."""


class ParamError(MatBernError, ValueError):
    pass


class PredictorRangeError(MatBernError, ValueError):
    """lambda_min(x - prediction) fell below -1."""


class StateEmptyError(MatBernError, ValueError):
    pass


class ConfigError(MatBernError, ValueError):
    pass


class FormatError(MatBernError, ValueError):
    """Malformed matrix text or CSV input."""
