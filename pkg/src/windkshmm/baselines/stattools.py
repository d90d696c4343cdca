"""Sample autocorrelation, partial autocorrelation and lag cut-offs."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateDataError, InsufficientDataError

CUTOFF_CAP = 24
Z95 = 1.96


def _check(series, max_lag):
    x = np.asarray(series, dtype=float)
    if max_lag < 0 or x.size <= max_lag + 1:
        raise InsufficientDataError(f"series of length {x.size} too short for max_lag={max_lag}")
    return x


def acf(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation ``r[0..max_lag]`` (``r[0] = 1``)."""
    x = _check(series, max_lag)
    d = x - x.mean()
    c0 = d @ d
    if c0 <= 0:
        raise DegenerateDataError("series is constant")
    return np.array([d[k:] @ d[: d.size - k] for k in range(max_lag + 1)]) / c0


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelation from the Durbin-Levinson recursion on ``acf``."""
    r = acf(series, max_lag)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    phi = np.zeros(0)
    v = 1.0
    for k in range(1, max_lag + 1):
        a = (r[k] - phi @ r[k - 1:0:-1]) / v if k > 1 else r[1]
        phi = np.concatenate([phi - a * phi[::-1], [a]])
        v *= 1.0 - a * a
        out[k] = a
    return out


def cutoff_lag(values, n: int, cap: int = CUTOFF_CAP) -> int:
    """Largest lag ``k <= cap`` with ``|values[k]| > 1.96 / sqrt(n)``; 0 if none."""
    band = Z95 / math.sqrt(n)
    v = np.abs(np.asarray(values, dtype=float))
    top = min(cap, v.size - 1)
    for k in range(top, 0, -1):
        if v[k] > band:
            return k
    return 0
