"""Exception taxonomy.

Two branches matter for the CLI exit-code contract:

* :class:`InputError` — malformed data, bad configuration, misuse of an
  operation (CLI exit code 2).
* :class:`NumericalError` — the data were well-formed but the computation is
  not trustworthy: weak instrument, rank-deficient designs, failed
  optimisation (CLI exit code 3).
"""


class ScsmError(Exception):
    """Base class for all package errors."""


class InputError(ScsmError):
    """Malformed input or misuse of an operation (CLI exit code 2)."""


class NumericalError(ScsmError):
    """Numerically untrustworthy computation (CLI exit code 3)."""


# --------------------------------------------------------------------------
# dataset
# --------------------------------------------------------------------------


class MissingColumn(InputError):
    """A required CSV column is absent."""


class BadStatusCode(InputError):
    """Status code outside the allowed set for the cause mode."""


class NonFiniteValue(InputError):
    """A numeric field is NaN/inf or not parseable as a number."""


class InvalidTime(InputError):
    """Negative follow-up time, or an event recorded at time zero."""


class NoEvents(InputError):
    """The dataset contains no event of the requested cause."""


# --------------------------------------------------------------------------
# instrument models
# --------------------------------------------------------------------------


class RankDeficientDesign(NumericalError):
    """Instrument-model design matrix is rank deficient."""


class LogisticNonBinaryInstrument(InputError):
    """Logistic instrument model requires a binary instrument."""


class LogisticNoConvergence(NumericalError):
    """Newton iterations for the logistic model did not converge."""


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


class WeakInstrument(NumericalError):
    """Recursion denominator collapsed (|den_k|/n below threshold) or the
    recursion produced non-finite increments at some event time."""

    def __init__(self, message, time=None, min_den_over_n=None):
        super().__init__(message)
        self.time = time
        self.min_den_over_n = min_den_over_n


class NonBinaryExposure(InputError):
    """Operation requires a binary (0/1) exposure."""


class NoJumpsInWindow(InputError):
    """No cumulative-effect jumps inside the requested time window."""


class EmptyWindow(InputError):
    """Requested integration window has zero length or no at-risk time."""


class RankDeficientRiskSet(NumericalError):
    """Least-squares design is rank deficient on some at-risk set."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DegenerateFirstStage(NumericalError):
    """First-stage fitted values are (numerically) constant, or the first
    stage cannot be fit as requested."""


class SingularSecondStage(NumericalError):
    """Second-stage linear system is singular."""


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------


class TraceMismatch(InputError):
    """Recursion trace does not match the dataset/grid it is paired with."""


class NoCompetingEvents(InputError):
    """No cause-2 events available for the competing-risk test."""


class CovariateInstrumentModel(InputError):
    """Operation is only available under the intercept-only instrument
    model."""


# --------------------------------------------------------------------------
# simulation / CLI configuration
# --------------------------------------------------------------------------


class ConfigError(InputError):
    """Simulation/CLI configuration violates the schema; message carries the
    offending field path."""
