"""Exception types raised by solvers, estimators, and file ingestion."""


class RelposeError(Exception):
    """Base class for all errors raised by this package."""


class NearParallel(RelposeError):
    """Two lines are (near-)parallel, so their junction is at infinity."""


class ParallelVPs(RelposeError):
    """The two vanishing point directions coincide; rotation is underdetermined."""


class CoincidentPoints(RelposeError):
    """Two image points coincide, so no line can be drawn through them."""


class DegenerateSample(RelposeError):
    """A minimal sample is rank-deficient and cannot constrain the model."""


class NoRealRoot(RelposeError):
    """The solver's polynomial has no real root; the sample is inconsistent."""


class RankDeficientA(RelposeError):
    """The translation coefficient matrix has no usable nullspace direction."""


class InsufficientData(RelposeError):
    """Not enough correspondences for any enabled solver's minimal sample."""


class EstimationFailed(RelposeError):
    """No hypothesis ever achieved a finite robust score."""


class ParseError(RelposeError):
    """A correspondence file is malformed."""


class CalibrationError(RelposeError):
    """Camera intrinsics are invalid or not invertible."""
