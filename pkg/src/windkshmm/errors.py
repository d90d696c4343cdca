"""Exception hierarchy shared across the package."""


class ForecastError(Exception):
    """Base class for every error raised by windkshmm."""


class InvalidInputError(ForecastError, ValueError):
    """Argument violates a documented precondition."""


class InsufficientDataError(InvalidInputError):
    """Series too short for the requested operation."""


class DegenerateDataError(InvalidInputError):
    """Data is constant (or otherwise degenerate) where variation is required."""


class RankError(ForecastError):
    """Requested rank exceeds the numerical rank of the data."""


class NormalizationCollapse(ForecastError, ArithmeticError):
    """A weight vector summed to (numerically) zero during normalization.

    The KSHMM filtering chain treats this as an unstable step; the switching
    forecaster resolves it to persistence.
    """


class ImpossibleEvidenceError(ForecastError):
    """Observation sequence has zero probability under the model."""


class ErgodicityError(ForecastError):
    """Transition matrix has no unique stationary distribution."""


class FitError(ForecastError):
    """An estimator failed to converge or every candidate fit failed."""


class DataFormatError(ForecastError):
    """Malformed, gapped or physically invalid input file."""


class ConfigError(ForecastError):
    """Invalid run configuration."""
