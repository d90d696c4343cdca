"""Concrete forecasters for the harness: PST, ARMA-AIC/BIC, SVR, KSHMM, KSHMM-PST.

Forecasters that share expensive training (the two ARMA criteria, the two
KSHMM variants) can be handed the same ``cache`` dict so the work happens
once per training series.
"""
from __future__ import annotations

import hashlib
import logging
from collections import deque

import numpy as np

from . import kshmm
from .baselines import arma, stattools, svr
from .baselines.persistence import persistence_forecast
from .dataset import WindSeries
from .errors import InvalidInputError, NormalizationCollapse
from .switching import envelope, kshmm_pst_forecast

log = logging.getLogger(__name__)

METHOD_NAMES = ("PST", "ARMA-AIC", "ARMA-BIC", "SVR", "KSHMM", "KSHMM-PST")


def _key(kind: str, train: WindSeries, *extra) -> tuple:
    digest = hashlib.sha1(np.ascontiguousarray(train.values).tobytes()).hexdigest()
    return (kind, train.turbine_id, digest, *extra)


class PersistenceForecaster:
    name = "PST"
    total = True

    def init(self, train: WindSeries) -> None:
        self._last = [float(train.values[-1])]
        self.last_diagnostics = {}

    def forecast(self) -> float:
        return persistence_forecast(self._last)

    def step(self, observation: float) -> None:
        self._last[0] = observation


class ArmaForecaster:
    """Order chosen by AIC or BIC over the grid bounded by the PACF/ACF cut-offs."""

    total = False

    def __init__(self, criterion: str = "AIC", cap: int = stattools.CUTOFF_CAP, cache: dict | None = None):
        if criterion.upper() not in ("AIC", "BIC"):
            raise InvalidInputError("criterion must be AIC or BIC")
        self.criterion = criterion.upper()
        self.name = f"ARMA-{self.criterion}"
        self.cap = cap
        self.cache = cache if cache is not None else {}

    def init(self, train: WindSeries) -> None:
        x = train.values
        key = _key("arma", train, self.cap)
        if key not in self.cache:
            n = x.size
            p_max = stattools.cutoff_lag(stattools.pacf(x, self.cap), n, self.cap)
            q_max = stattools.cutoff_lag(stattools.acf(x, self.cap), n, self.cap)
            log.info("%s: ARMA grid p<=%d q<=%d", train.turbine_id, p_max, q_max)
            self.cache[key] = (p_max, q_max, arma.fit_order_grid(x, p_max, q_max))
        self.p_max, self.q_max, fits = self.cache[key]
        _, _, self.model = arma.select_from_fits(fits, self.criterion)
        self._filter = arma.ArmaFilter(self.model)
        for v in x:
            self._filter.update(float(v))
        self.last_diagnostics = {}

    def forecast(self) -> float:
        return self._filter.forecast()

    def step(self, observation: float) -> None:
        self._filter.update(observation)


class SvrForecaster:
    """epsilon-SVR on the last ``p_max`` values (PACF cut-off, at least 1)."""

    name = "SVR"
    total = False

    def __init__(self, epsilon: float = svr.DEFAULT_EPSILON, sigmas=svr.SIGMA_GRID, Cs=svr.C_GRID,
                 cap: int = stattools.CUTOFF_CAP):
        self.epsilon = epsilon
        self.sigmas = tuple(sigmas)
        self.Cs = tuple(Cs)
        self.cap = cap

    def init(self, train: WindSeries) -> None:
        x = train.values
        self.p_max = max(1, stattools.cutoff_lag(stattools.pacf(x, self.cap), x.size, self.cap))
        self.search = svr.svr_grid_search(x, self.p_max, self.epsilon, self.sigmas, self.Cs)
        self._window = deque((float(v) for v in x[-self.p_max:]), maxlen=self.p_max)
        self.last_diagnostics = {}

    def forecast(self) -> float:
        return svr.svr_forecast(self.search.model, np.fromiter(self._window, float))

    def step(self, observation: float) -> None:
        self._window.append(observation)


class KshmmForecaster:
    """KSHMM filtering with the mode as point forecast.

    With ``switching=True`` this is KSHMM-PST: unstable steps (mean outside
    the training range, variance out of bounds, mode not converged, or a
    normalization collapse) fall back to the last observation. A collapse
    during the belief update restarts the filter from its initial state.
    """

    def __init__(self, switching: bool = False, rank: int = kshmm.DEFAULT_RANK,
                 lam: float | None = None, sigma: float | None = None,
                 model: kshmm.KshmmModel | None = None, cache: dict | None = None):
        self.switching = switching
        self.name = "KSHMM-PST" if switching else "KSHMM"
        self.total = switching
        self.rank = rank
        self.lam = lam
        self.sigma = sigma
        self.model = model
        self.cache = cache if cache is not None else {}
        self.resets = 0

    def init(self, train: WindSeries) -> None:
        if self.model is None:
            key = _key("kshmm", train, self.rank, self.lam, self.sigma)
            if key not in self.cache:
                self.cache[key] = kshmm.fit(train.values, rank=self.rank, lam=self.lam, sigma=self.sigma)
            self.model = self.cache[key]
        self.env = envelope(self.model.x2)
        self._last = float(train.values[-1])
        self._belief = self._initial_belief()
        self.last_diagnostics = {}

    def _initial_belief(self):
        try:
            return kshmm.filter_init(self.model)
        except NormalizationCollapse:
            log.warning("%s: initial belief collapsed", self.name)
            return None

    def predictive(self):
        """ForecastDistribution for the next step, or None if the step is unstable."""
        if self._belief is None:
            return None
        try:
            return kshmm.forecast(self.model, self._belief)
        except NormalizationCollapse:
            return None

    def forecast(self) -> float:
        fd = self.predictive()
        diag = {
            "pred_mean": fd.mean if fd else None,
            "pred_var": fd.variance if fd else None,
            "mode_converged": fd.mode_converged if fd else None,
        }
        if self.switching:
            value, switched = kshmm_pst_forecast(fd, self._last, self.env)
            diag["switched"] = switched
            self.last_diagnostics = diag
            return value
        self.last_diagnostics = diag
        if fd is None:
            raise NormalizationCollapse("KSHMM weights collapsed at this step")
        return fd.mode

    def step(self, observation: float) -> None:
        self._last = observation
        if self._belief is None:
            self._belief = self._initial_belief()
            return
        try:
            self._belief = kshmm.filter_update(self.model, self._belief, observation)
        except NormalizationCollapse:
            log.info("%s: belief collapsed at x=%g; restarting filter", self.name, observation)
            self.resets += 1
            self._belief = self._initial_belief()


def build_methods(names, *, rank: int = kshmm.DEFAULT_RANK, lam: float | None = None,
                  sigma: float | None = None, epsilon: float = svr.DEFAULT_EPSILON,
                  sigma_grid=svr.SIGMA_GRID, c_grid=svr.C_GRID, arma_cap: int = stattools.CUTOFF_CAP,
                  cache: dict | None = None) -> list:
    """Instantiate forecasters by name, sharing one training cache."""
    cache = {} if cache is None else cache
    out = []
    for name in names:
        if name == "PST":
            out.append(PersistenceForecaster())
        elif name in ("ARMA-AIC", "ARMA-BIC"):
            out.append(ArmaForecaster(name.split("-")[1], cap=arma_cap, cache=cache))
        elif name == "SVR":
            out.append(SvrForecaster(epsilon, sigma_grid, c_grid, cap=arma_cap))
        elif name in ("KSHMM", "KSHMM-PST"):
            out.append(KshmmForecaster(name == "KSHMM-PST", rank, lam, sigma, cache=cache))
        else:
            raise InvalidInputError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    return out
