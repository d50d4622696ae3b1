"""Exception hierarchy.

Validation failures (bad inputs, violated preconditions) map to CLI exit
code 2; numerical failures inside otherwise valid computations map to 3.
"""


class ColmodeError(Exception):
    """Base class for all package errors."""


class ValidationError(ColmodeError, ValueError):
    """Invalid inputs or a violated precondition."""


class NumericalError(ColmodeError, ArithmeticError):
    """Numerical failure during an otherwise valid computation."""


class UnstableDriftError(ValidationError):
    """Drift matrix is not Hurwitz where a steady state is required."""


class SingularSolveError(NumericalError):
    """Linear system for the steady covariance is numerically rank-deficient."""


class NegativeTimeError(ValidationError):
    """Covariance evolution requested for t < 0."""


class NotPositiveDefiniteError(ValidationError):
    """Covariance matrix is not positive definite."""


class ComplexRootError(NumericalError):
    """PT symplectic spectrum discriminant negative beyond tolerance."""


class StepTooLargeError(ValidationError):
    """Euler-Maruyama step exceeds the accuracy guard."""


class UnstableGainError(ValidationError):
    """Classical parametric gain at or beyond the stability threshold."""


class NotPsdError(ValidationError):
    """Classical covariance is not positive semidefinite."""


class BandwidthExceedsNyquistError(ValidationError):
    """Requested analysis bandwidth exceeds the record's Nyquist frequency."""


class TooFewSegmentsError(ValidationError):
    """Record too short for the requested segment length."""


class InsufficientEnsembleError(ValidationError):
    """Ensemble statistics need at least two independent estimates."""


class MissingNoiseInputError(ValidationError):
    """None of the alternative noise inputs can supply S_V(0)."""


class ZeroOccupancyError(ValidationError):
    """Cooperativity is degenerate at zero effective occupancy."""


class OutOfRangeError(ValidationError):
    """Requested point lies outside tabulated data; no extrapolation."""
