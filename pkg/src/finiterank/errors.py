"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and explicit rather than reusing ValueError everywhere.
"""


class FiniteRankError(Exception):
    """Base class for package errors."""


class DomainError(FiniteRankError):
    """A point lies outside the gridded evaluation domain."""


class UnknownIndexError(FiniteRankError, LookupError):
    """A weight index (j, l) is not declared by the family."""


class OrderError(FiniteRankError):
    """A derivative order exceeds what a function or table provides."""


class GeometryError(FiniteRankError):
    """A box construction leaves the domain or is otherwise malformed."""


class ResolutionError(FiniteRankError):
    """The evaluation grid is too coarse for the requested tolerance."""


class CoverDefectError(FiniteRankError):
    """A partition denominator vanishes inside the cut-off support."""


class QuadratureError(FiniteRankError):
    """Quadrature refinement failed to converge to the requested tolerance."""


class CriterionError(FiniteRankError):
    """A compact with the requested tail bound does not exist in the search region."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConvergenceError(FiniteRankError):
    """An iterative scale search exhausted its budget."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConfigError(FiniteRankError):
    """A scenario or run configuration could not be parsed."""
