"""ARMA(p, q) by conditional sum of squares, with AIC/BIC order selection.

Model on the demeaned series ``z_t = x_t - mu``::

    z_t = sum_i phi_i z_{t-i} + e_t + sum_j theta_j e_{t-j}

Residuals are computed from index ``start >= p`` onward with zero
pre-sample residuals.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from ..errors import DegenerateDataError, FitError, InsufficientDataError, InvalidInputError


@dataclass(frozen=True)
class ArmaModel:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    intercept: float  # process mean mu
    sigma2: float
    loglik: float
    n_eff: int

    @property
    def n_params(self) -> int:
        # ARMA coefficients + mean + innovation variance
        return self.p + self.q + 2


def _roots_inside(poly_tail, sign):
    # roots of z^k + sign*c1 z^{k-1} + ... must lie strictly in the unit disc
    if len(poly_tail) == 0:
        return True
    r = np.roots(np.concatenate([[1.0], sign * np.asarray(poly_tail)]))
    return bool(np.all(np.abs(r) < 1.0))


def is_stationary(phi) -> bool:
    return _roots_inside(phi, -1.0)


def is_invertible(theta) -> bool:
    return _roots_inside(theta, 1.0)


def css_residuals(x, mu, phi, theta, start: int) -> np.ndarray:
    """Innovations ``e_start .. e_{n-1}`` given parameters."""
    z = np.asarray(x, dtype=float) - mu
    p = len(phi)
    w = z[start:].copy()
    for i in range(1, p + 1):
        w -= phi[i - 1] * z[start - i: z.size - i]
    if len(theta):
        return signal.lfilter([1.0], np.concatenate([[1.0], theta]), w)
    return w


def _lstsq(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def hannan_rissanen(x, p: int, q: int):
    """Two-stage regression start values ``(mu, phi, theta)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    mu = float(x.mean())
    z = x - mu
    if p == 0 and q == 0:
        return mu, np.zeros(0), np.zeros(0)
    eps = np.zeros(n)
    h = 0
    if q > 0:
        h = min(max(p + q, int(math.ceil(10 * math.log10(n)))), n // 4)
        X = np.column_stack([z[h - i: n - i] for i in range(1, h + 1)])
        a = _lstsq(X, z[h:])
        eps[h:] = z[h:] - X @ a
    s = max(p, h + q)
    cols = [z[s - i: n - i] for i in range(1, p + 1)] + [eps[s - j: n - j] for j in range(1, q + 1)]
    coef = _lstsq(np.column_stack(cols), z[s:])
    phi, theta = coef[:p], coef[p:]
    for _ in range(200):
        if is_stationary(phi) and is_invertible(theta):
            break
        phi = 0.9 * phi if not is_stationary(phi) else phi
        theta = 0.9 * theta if not is_invertible(theta) else theta
    return mu, phi, theta


def _gaussian_loglik(ssr, n):
    s2 = ssr / n
    return -0.5 * n * (math.log(2 * math.pi * s2) + 1.0), s2


def pacf_to_coefs(r) -> np.ndarray:
    """Coefficients ``c`` of ``1 - sum c_i z^i`` from partial autocorrelations in (-1, 1).

    The map is onto the stationary region (all roots outside the unit circle).
    """
    c = np.zeros(0)
    for rk in np.asarray(r, dtype=float):
        c = np.concatenate([c - rk * c[::-1], [rk]])
    return c


def coefs_to_pacf(c) -> np.ndarray:
    """Inverse of :func:`pacf_to_coefs` (step-down recursion)."""
    c = np.asarray(c, dtype=float).copy()
    r = np.zeros(c.size)
    for k in range(c.size, 0, -1):
        rk = c[k - 1]
        r[k - 1] = rk
        if k > 1:
            c = (c[: k - 1] + rk * c[k - 2::-1]) / (1.0 - rk * rk)
    return r


_R_CLIP = 0.999


def _to_free(r):
    r = np.clip(r, -_R_CLIP, _R_CLIP)
    return r / np.sqrt(1.0 - r * r)


def _from_free(u):
    return u / np.sqrt(1.0 + u * u)


def fit_arma(series, p: int, q: int, n_cond: int = 0, max_nfev: int | None = None) -> ArmaModel:
    """Conditional-sum-of-squares fit of ARMA(p, q).

    Starts from Hannan-Rissanen estimates and refines by Levenberg-Marquardt
    on the residual vector. AR and MA polynomials are parametrized through
    partial autocorrelations, so every iterate is stationary and invertible.
    ``n_cond`` conditions on at least that many initial observations so that
    fits of different orders share the same effective sample.
    """
    x = np.asarray(series, dtype=float)
    if p < 0 or q < 0:
        raise InvalidInputError("orders must be nonnegative")
    if x.size < 10 * (p + q + 1):
        raise InsufficientDataError(f"series too short for ARMA({p},{q})")
    if np.ptp(x) == 0:
        raise DegenerateDataError("series is constant")
    start = max(p, n_cond)
    n_eff = x.size - start

    if p == 0 and q == 0:
        mu = float(x[start:].mean())
        ll, s2 = _gaussian_loglik(float(np.sum((x[start:] - mu) ** 2)), n_eff)
        return ArmaModel(0, 0, np.zeros(0), np.zeros(0), mu, s2, ll, n_eff)

    mu0, phi0, th0 = hannan_rissanen(x, p, q)
    scale = float(np.std(x))

    def unpack(params):
        phi = pacf_to_coefs(_from_free(params[1:1 + p]))
        theta = -pacf_to_coefs(_from_free(params[1 + p:]))
        return params[0] * scale, phi, theta

    def resid(params):
        mu, phi, theta = unpack(params)
        return css_residuals(x, mu, phi, theta, start)

    x0 = np.concatenate([[mu0 / scale], _to_free(coefs_to_pacf(phi0)), _to_free(coefs_to_pacf(-th0))])
    res = optimize.least_squares(resid, x0, method="lm", xtol=1e-8, ftol=1e-8,
                                 max_nfev=max_nfev or 200 * (x0.size + 1))
    if res.status <= 0 or not np.all(np.isfinite(res.fun)):
        raise FitError(f"ARMA({p},{q}) optimizer did not converge: {res.message}")
    mu, phi, theta = unpack(res.x)
    if not (is_stationary(phi) and is_invertible(theta)):
        raise FitError(f"ARMA({p},{q}) estimate lies on the stationarity/invertibility boundary")
    ssr = float(res.fun @ res.fun)
    ll, s2 = _gaussian_loglik(ssr, n_eff)
    return ArmaModel(p, q, phi, theta, float(mu), s2, ll, n_eff)


def information_criterion(loglik: float, k: int, n: int, criterion: str) -> float:
    crit = criterion.upper()
    if crit == "AIC":
        return -2.0 * loglik + 2.0 * k
    if crit == "BIC":
        return -2.0 * loglik + k * math.log(n)
    raise InvalidInputError(f"unknown criterion {criterion!r}")


def fit_order_grid(series, p_max: int, q_max: int) -> dict:
    """Fit every order in ``{0..p_max} x {0..q_max}``; failed fits map to None.

    All fits condition on the first ``p_max`` observations.
    """
    fits = {}
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            try:
                fits[(p, q)] = fit_arma(series, p, q, n_cond=p_max)
            except (FitError, InsufficientDataError):
                fits[(p, q)] = None
    return fits


def select_from_fits(fits: dict, criterion: str):
    """Criterion minimizer; ties go to the smallest ``p + q``, then smallest ``p``."""
    best = None
    for (p, q), model in fits.items():
        if model is None:
            continue
        score = information_criterion(model.loglik, model.n_params, model.n_eff, criterion)
        key = (score, p + q, p)
        if best is None or key < best[0]:
            best = (key, model)
    if best is None:
        raise FitError("every candidate ARMA order failed to fit")
    model = best[1]
    return model.p, model.q, model


def select_arma(series, p_max: int, q_max: int, criterion: str = "AIC"):
    return select_from_fits(fit_order_grid(series, p_max, q_max), criterion)


def arma_forecast_one_step(model: ArmaModel, history) -> float:
    """One-step conditional mean given the full history.

    Residuals are rebuilt from the start of ``history`` (zero before index p).
    """
    h = np.asarray(history, dtype=float)
    if h.size < model.p:
        raise InsufficientDataError("history shorter than the AR order")
    f = ArmaFilter(model)
    for v in h:
        f.update(v)
    return f.forecast()


class ArmaFilter:
    """Rolling one-step forecaster with fixed parameters."""

    def __init__(self, model: ArmaModel):
        self.model = model
        self._z = deque(maxlen=max(model.p, 1))
        self._e = deque([0.0] * model.q, maxlen=max(model.q, 1))
        self._seen = 0

    def forecast(self) -> float:
        m = self.model
        if self._seen < m.p:
            raise InsufficientDataError("history shorter than the AR order")
        zs = list(self._z)[::-1]  # most recent first
        es = list(self._e)[::-1]
        pred = sum(m.phi[i] * zs[i] for i in range(m.p))
        pred += sum(m.theta[j] * es[j] for j in range(m.q))
        return m.intercept + float(pred)

    def update(self, value: float) -> None:
        m = self.model
        z = value - m.intercept
        if self._seen >= m.p:
            e = z - (self.forecast() - m.intercept)
        else:
            e = 0.0
        self._z.append(z)
        if m.q:
            self._e.append(e)
        self._seen += 1
