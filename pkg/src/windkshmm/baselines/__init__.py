"""Comparison forecasters: persistence, ARMA and epsilon-SVR."""
from .arma import ArmaFilter, ArmaModel, arma_forecast_one_step, fit_arma, select_arma
from .persistence import persistence_forecast
from .stattools import acf, cutoff_lag, pacf
from .svr import LagMatrix, SvrModel, build_lag_matrix, svr_forecast, svr_grid_search, svr_train

__all__ = [
    "ArmaFilter", "ArmaModel", "arma_forecast_one_step", "fit_arma", "select_arma",
    "persistence_forecast", "acf", "cutoff_lag", "pacf",
    "LagMatrix", "SvrModel", "build_lag_matrix", "svr_forecast", "svr_grid_search", "svr_train",
]
