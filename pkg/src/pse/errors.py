"""Exception types shared across the package."""


class PseError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrix(PseError):
    """A linear system's factorization produced a pivot too small to trust."""


class MaxIterationsExceeded(PseError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""


class NonFiniteObjective(PseError):
    """An objective value or derivative came back NaN or infinite."""


class DomainError(PseError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DimensionMismatch(PseError, ValueError):
    """Array arguments do not conform."""


class InvalidRange(PseError, ValueError):
    """An interval was specified with lo >= hi."""


class OutOfSupport(PseError, ValueError):
    """A basis evaluation point lies outside the knot support."""


class NoConvergence(PseError):
    """A fixed-point or constrained solver failed to converge."""


class NoStabilization(PseError):
    """The smoothing-parameter loop hit its cap without the estimates settling."""


class TooFewPoints(PseError, ValueError):
    """Not enough observations for the requested fit."""


class DegenerateDesign(PseError):
    """A local weighted design matrix is singular."""


class ParseError(PseError, ValueError):
    """A data file could not be parsed; the message names the offending line."""


class SchemaError(PseError, ValueError):
    """A data file is missing required columns."""


class InvalidInterval(PseError, ValueError):
    """An interval has lo > hi."""


class IoError(PseError, OSError):
    """A report could not be written."""


class NotNegativeDefiniteWarning(UserWarning):
    """The information matrix has a nonpositive eigenvalue at the optimum."""


class SupportClampWarning(UserWarning):
    """An evaluation point was clamped onto the knot support."""
