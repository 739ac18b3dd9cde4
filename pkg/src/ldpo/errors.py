"""Exception hierarchy shared by all ldpo modules."""


class LdpoError(Exception):
    """Base class for every error raised by this package."""


# --- simplex ---------------------------------------------------------------

class EmptyVectorError(LdpoError):
    """A weight vector of length zero was supplied."""


class NegativeWeightError(LdpoError):
    """A weight is negative beyond the clamping tolerance."""


class NotNormalizedError(LdpoError):
    """Weights do not sum to one within tolerance (or are non-finite)."""


class IndexOutOfRangeError(LdpoError):
    """A coordinate or candidate index is outside its valid range."""


class InvalidConcentrationError(LdpoError):
    """A Dirichlet concentration parameter is not strictly positive."""


# --- dataset ---------------------------------------------------------------

class ParseError(LdpoError):
    """An input file could not be parsed; the message names the location."""


class MissingDimensionError(LdpoError):
    """A candidate lacks a score for a declared preference dimension."""


class DuplicateCandidateIdError(LdpoError):
    """Two candidates in one prompt group share an id."""


class TooFewCandidatesError(LdpoError):
    """A prompt group has fewer than two candidates."""


class NonFiniteScoreError(LdpoError):
    """A rating is NaN or infinite."""


class UnsupportedNError(LdpoError):
    """An operation defined only for two candidates got a different count."""


# --- shared ----------------------------------------------------------------

class DimensionMismatchError(LdpoError):
    """Two objects disagree on the number of preference dimensions."""


# --- policy / losses -------------------------------------------------------

class MissingParameterError(LdpoError):
    """A policy (or reference) has no stored value for a requested candidate."""


class NonFiniteLogRatioError(LdpoError):
    """A policy/reference log-ratio is NaN or infinite."""


class InvalidTargetError(LdpoError):
    """A target vector is not a valid probability distribution."""


# --- scheduler -------------------------------------------------------------

class EmptyCandidatesError(LdpoError):
    """A scheduling distribution was requested over zero candidates."""


# --- trainer ---------------------------------------------------------------

class DivergenceDetectedError(LdpoError):
    """Training produced a non-finite loss; the policy keeps its last good state."""

    def __init__(self, message, step=None, epoch=None):
        super().__init__(message)
        self.step = step
        self.epoch = epoch
