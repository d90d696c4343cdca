"""Naive persistence: the next value equals the last observed one."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError


def persistence_forecast(history) -> float:
    h = np.asarray(history, dtype=float)
    if h.size == 0:
        raise InvalidInputError("persistence needs at least one observation")
    return float(h[-1])
