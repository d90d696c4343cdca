"""Kernel spectral HMM forecasting of hourly wind speed, with baselines and
a rolling-evaluation benchmark."""
from .errors import (ConfigError, DataFormatError, DegenerateDataError, ForecastError,
                     InsufficientDataError, InvalidInputError, NormalizationCollapse, RankError)
from .kernels import KernelConfig, gram_matrix, kernel_vector, median_heuristic
from .kshmm import (BeliefState, ForecastDistribution, KshmmModel, TrainingTriples, filter_init,
                    filter_update, fit, forecast, load_model, mode_estimate, save_model, train)
from .switching import StabilityEnvelope, envelope, is_stable, kshmm_pst_forecast

__version__ = "0.1.0"
