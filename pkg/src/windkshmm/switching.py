"""Fallback to persistence when the KSHMM predictive distribution looks unstable."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilityEnvelope:
    """Range and (population) variance of the training midpoints."""

    min_x2: float
    max_x2: float
    var_x2: float


def envelope(x2) -> StabilityEnvelope:
    x = np.asarray(x2, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("envelope needs at least two training points")
    return StabilityEnvelope(min_x2=float(x.min()), max_x2=float(x.max()), var_x2=float(np.var(x)))


def is_stable(xi: float, V: float, env: StabilityEnvelope) -> bool:
    """Mean strictly inside the training range and ``0 <= V < var``."""
    return bool(env.min_x2 < xi < env.max_x2 and 0.0 <= V < env.var_x2)


def kshmm_pst_forecast(forecast, last_obs: float, env: StabilityEnvelope) -> tuple[float, bool]:
    """Point forecast of the switching method.

    ``forecast`` is a ForecastDistribution, or ``None`` when the KSHMM step
    failed upstream. Returns ``(value, switched)`` where ``switched`` means
    the persistence value ``last_obs`` was used. Never raises.
    """
    try:
        if forecast is None:
            log.debug("upstream KSHMM failure; using persistence")
            return last_obs, True
        ok = (
            forecast.mode_converged
            and math.isfinite(forecast.mode)
            and is_stable(forecast.mean, forecast.variance, env)
        )
        forecast.stable = ok
        if ok:
            return float(forecast.mode), False
        return last_obs, True
    except Exception:  # totality: any malformed forecast resolves to persistence
        log.exception("switching rule failed; using persistence")
        return last_obs, True
