"""epsilon-SVR with a Gaussian RBF kernel, solved by SMO.

The dual is written over ``2l`` variables (``alpha+`` then ``alpha-``) with
labels ``+1/-1``::

    min 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a <= C
    Q_ij = y_i y_j K(i mod l, j mod l),   p = [eps - t, eps + t]

Working pairs are chosen with second-order information (maximal gain over
violating pairs); termination when the maximal KKT violation drops below
``tol``. The regression function is ``f(x) = sum_i beta_i k(x_i, x) + b``
with ``beta = alpha+ - alpha-``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..errors import FitError, InvalidInputError
from ..kernels import KernelConfig, gram_matrix

SIGMA_GRID = tuple(10.0 ** -i for i in range(0, 8))
C_GRID = tuple(10.0 ** -i for i in range(-1, 5))
DEFAULT_EPSILON = 0.1
KKT_TOL = 1e-3
_TAU = 1e-12


@dataclass(frozen=True)
class LagMatrix:
    X: np.ndarray  # rows: x_{t-p+1} .. x_t
    y: np.ndarray  # targets: x_{t+1}

    @property
    def n_lags(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class SvrModel:
    kernel: KernelConfig
    C: float
    epsilon: float
    alphas: np.ndarray  # beta_i = alpha+_i - alpha-_i
    bias: float
    support_inputs: np.ndarray
    kkt_violation: float = 0.0
    iterations: int = 0

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.support_inputs.shape[1]:
            raise InvalidInputError("lag vector has the wrong length")
        return gram_matrix(self.kernel, X, self.support_inputs) @ self.alphas + self.bias


def build_lag_matrix(series, p_max: int) -> LagMatrix:
    x = np.asarray(series, dtype=float)
    if p_max < 1 or p_max >= x.size:
        raise InvalidInputError(f"need 1 <= p_max < len(series), got {p_max}")
    n_rows = x.size - p_max
    X = np.lib.stride_tricks.sliding_window_view(x, p_max)[:n_rows].copy()
    return LagMatrix(X=X, y=x[p_max:].copy())


def _smo(K: np.ndarray, t: np.ndarray, C: float, eps: float, tol: float, max_iter: int):
    """Return ``(beta, bias, violation, iterations)`` for a precomputed kernel."""
    l = t.size
    y = np.concatenate([np.ones(l), -np.ones(l)])
    p = np.concatenate([eps - t, eps + t])
    a = np.zeros(2 * l)
    G = p.copy()
    Kd = np.diag(K)
    QD = np.concatenate([Kd, Kd])

    def q_col(i):
        r = K[i % l]
        return y[i] * y * np.concatenate([r, r])

    it = 0
    violation = np.inf
    while it < max_iter:
        up = ((y > 0) & (a < C)) | ((y < 0) & (a > 0))
        low = ((y < 0) & (a < C)) | ((y > 0) & (a > 0))
        mg = -y * G
        if not up.any() or not low.any():
            violation = 0.0
            break
        cand = np.where(up, mg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmin = np.min(np.where(low, mg, np.inf))
        violation = gmax - gmin
        if violation < tol:
            break
        Qi = q_col(i)
        b = gmax - mg
        ok = low & (b > 0)
        quad = QD[i] + QD - 2.0 * y[i] * y * Qi
        quad = np.where(quad > 0, quad, _TAU)
        gain = np.where(ok, -(b * b) / quad, np.inf)
        j = int(np.argmin(gain))
        if not np.isfinite(gain[j]):
            break
        Qj = q_col(j)
        ai, aj = a[i], a[j]
        if y[i] != y[j]:
            qd = QD[i] + QD[j] + 2.0 * Qi[j]
            delta = (-G[i] - G[j]) / max(qd, _TAU)
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            qd = QD[i] + QD[j] - 2.0 * Qi[j]
            delta = (G[i] - G[j]) / max(qd, _TAU)
            total = ai + aj
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        G += Qi * (a[i] - ai) + Qj * (a[j] - aj)
        it += 1
    else:
        raise FitError(f"SMO did not reach KKT tolerance {tol} in {max_iter} iterations "
                       f"(violation {violation:.3g})")

    yG = y * G
    free = (a > 0) & (a < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        at_upper = a >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        bounds = []
        if ub_mask.any():
            bounds.append(yG[ub_mask].min())
        if (~ub_mask).any():
            bounds.append(yG[~ub_mask].max())
        rho = float(np.mean(bounds))
    beta = a[:l] - a[l:]
    return beta, -rho, float(max(violation, 0.0)), it


def svr_train(lags: LagMatrix, kernel: KernelConfig, C: float, epsilon: float = DEFAULT_EPSILON,
              tol: float = KKT_TOL, max_iter: int | None = None, K: np.ndarray | None = None) -> SvrModel:
    """Solve the epsilon-SVR dual. ``K`` may pass a precomputed Gram matrix."""
    if not C > 0:
        raise InvalidInputError("C must be positive")
    if epsilon < 0:
        raise InvalidInputError("epsilon must be nonnegative")
    if K is None:
        K = gram_matrix(kernel, lags.X, lags.X)
    l = lags.y.size
    beta, bias, viol, its = _smo(K, lags.y, C, epsilon, tol, max_iter or max(10**6, 100 * l))
    return SvrModel(kernel=kernel, C=C, epsilon=epsilon, alphas=beta, bias=bias,
                    support_inputs=lags.X, kkt_violation=viol, iterations=its)


def svr_forecast(model: SvrModel, recent_lags) -> float:
    v = np.asarray(recent_lags, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError("lag vector must be 1-d")
    return float(model.predict(v[None, :])[0])


def dual_objective(K, targets, beta, epsilon) -> float:
    """Primal-form dual value ``1/2 b'Kb - t'b + eps |b|_1`` (minimized)."""
    beta = np.asarray(beta)
    return float(0.5 * beta @ K @ beta - np.asarray(targets) @ beta + epsilon * np.abs(beta).sum())


def contiguous_folds(n_rows: int, k: int = 3):
    return np.array_split(np.arange(n_rows), k)


def cv_rmse(lags: LagMatrix, sigma: float, C: float, epsilon: float = DEFAULT_EPSILON,
            K: np.ndarray | None = None, k: int = 3) -> float:
    """Mean validation RMSE over ``k`` contiguous, order-preserving folds."""
    cfg = KernelConfig(sigma=sigma)
    if K is None:
        K = gram_matrix(cfg, lags.X, lags.X)
    scores = []
    for fold in contiguous_folds(lags.y.size, k):
        mask = np.ones(lags.y.size, dtype=bool)
        mask[fold] = False
        tr = LagMatrix(lags.X[mask], lags.y[mask])
        model = svr_train(tr, cfg, C, epsilon, K=K[np.ix_(mask, mask)])
        pred = K[np.ix_(fold, mask)] @ model.alphas + model.bias
        scores.append(np.sqrt(np.mean((lags.y[fold] - pred) ** 2)))
    return float(np.mean(scores))


class SvrSearchResult(NamedTuple):
    sigma: float
    C: float
    model: SvrModel
    scores: dict


def svr_grid_search(train_series, p_max: int, epsilon: float = DEFAULT_EPSILON,
                    sigmas=SIGMA_GRID, Cs=C_GRID,
                    scorer: Callable[[float, float], float] | None = None) -> SvrSearchResult:
    """Exhaustive (sigma, C) search by 3-fold CV RMSE, then refit on all rows.

    Grid order is sigma-major; the first minimum wins. ``scorer`` replaces
    the cross-validation score (used to test the selection logic).
    """
    lags = build_lag_matrix(train_series, p_max)
    if lags.y.size < 6:
        raise InvalidInputError("too few lag rows for three-fold CV")
    scores = {}
    for sigma in sigmas:
        K = None if scorer is not None else gram_matrix(KernelConfig(sigma), lags.X, lags.X)
        for C in Cs:
            try:
                s = scorer(sigma, C) if scorer is not None else cv_rmse(lags, sigma, C, epsilon, K=K)
            except FitError:
                s = np.inf
            scores[(sigma, C)] = s
    finite = {key: v for key, v in scores.items() if np.isfinite(v)}
    if not finite:
        raise FitError("every SVR grid point failed")
    best = min(finite, key=lambda key: finite[key])  # dict order = grid order
    sigma, C = best
    model = svr_train(lags, KernelConfig(sigma), C, epsilon)
    return SvrSearchResult(sigma, C, model, scores)
