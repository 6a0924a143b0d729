"""Exception hierarchy.

``NumericalError`` subclasses signal a well-formed request that failed for
numerical reasons (singular Gram matrix, non-PD covariance, ...). The CLI maps
them to exit code 2; every other ``LabError`` is a usage problem (exit 1).
"""


class LabError(Exception):
    pass


class NumericalError(LabError):
    pass


class DimensionMismatch(LabError, ValueError):
    pass


class InvalidRho(LabError, ValueError):
    pass


class InvalidSparsity(LabError, ValueError):
    pass


class DegenerateRegime(LabError, ValueError):
    pass


class DegenerateGeometry(LabError, ValueError):
    pass


class DegenerateSparsity(LabError, ValueError):
    pass


class InvalidConstants(LabError, ValueError):
    pass


class InsufficientDof(LabError, ValueError):
    pass


class Underdetermined(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class ZeroColumn(NumericalError):
    pass


class SingularGram(NumericalError):
    pass


class SingularSubmatrix(NumericalError):
    pass


class NotConverged(RuntimeWarning):
    """Emitted (as a warning) when coordinate descent hits ``max_iters``."""
