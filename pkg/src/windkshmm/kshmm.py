"""Kernel spectral HMM: finite-sample training, filtering and readout.

Training works on sliding-window triples ``(x1, x2, x3)`` of a scalar series.
Gram matrices::

    K = k(x1, x1)    L = k(x2, x2)    G = k(x2, x1)    F = k(x2, x3)

The generalized eigenproblem ``L K L a = w L a`` yields the ``N`` leading
directions ``A`` with eigenvalue magnitudes ``omega`` and scalings
``D = diag((a_i' L a_i)^(-1/2))``. Filtering propagates an ``N``-vector
through

    B(x) = (1/m) D A' F diag(n((L + lam I)^{-1} n(k2(x)))) Q,   Q = K L A D diag(1/omega)

where ``n(w) = w / sum(w)``, and reads out signed weights ``eta = n(Q b)``
over the training midpoints ``x2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import (
    DataFormatError,
    DegenerateDataError,
    InsufficientDataError,
    InvalidInputError,
    NormalizationCollapse,
    RankError,
)
from .kernels import KernelConfig, gram_matrix, kernel_vector, median_heuristic

DEFAULT_RANK = 6
RIDGE_SCALE = 1e-10
EIG_RTOL = 1e-12
# |sum(w)| below this multiple of eps * sum(|w|) is rounding noise.
COLLAPSE_ULPS = 64.0
MODE_TOL = 1e-8
MODE_MAX_ITER = 100
MODE_DENOM_TOL = 1e-12
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainingTriples:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    @property
    def m(self) -> int:
        return self.x1.shape[0]


@dataclass(frozen=True)
class BeliefState:
    b: np.ndarray


@dataclass
class ForecastDistribution:
    """Predictive weights over ``x2`` and the statistics derived from them."""

    eta: np.ndarray
    mean: float
    variance: float
    mode: float
    mode_converged: bool
    mode_iterations: int = 0
    stable: bool | None = None


@dataclass(frozen=True, eq=False)
class KshmmModel:
    kernel: KernelConfig
    lam: float
    rank: int
    A: np.ndarray
    omega: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    beta1: np.ndarray
    chol: np.ndarray  # lower Cholesky factor of L + lam I
    F: np.ndarray
    x2: np.ndarray
    readout: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.x2.shape[0]
        N = self.rank
        if self.A.shape != (m, N) or self.Q.shape != (m, N) or self.beta1.shape != (N,):
            raise InvalidInputError("inconsistent model shapes")
        # (1/m) D A' F, shared by every observation operator
        object.__setattr__(self, "readout", (self.D[:, None] * (self.A.T @ self.F)) / m)

    @property
    def m(self) -> int:
        return self.x2.shape[0]


def reshape_sliding(series) -> TrainingTriples:
    """Overlapping windows ``(s[l], s[l+1], s[l+2])``, ``l = 0 .. n-3``."""
    s = np.asarray(series, dtype=float)
    if s.ndim != 1 or s.size < 4:
        raise InsufficientDataError("need a 1-d series of length >= 4")
    return TrainingTriples(x1=s[:-2].copy(), x2=s[1:-1].copy(), x3=s[2:].copy())


def normalize(w) -> np.ndarray:
    """``w / sum(w)``; raises NormalizationCollapse when the sum is numerically zero."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    scale = np.abs(w).sum()
    if not (np.isfinite(total) and np.isfinite(scale)) or scale == 0.0:
        raise NormalizationCollapse("weight vector is zero or non-finite")
    if abs(total) <= max(1e-300, COLLAPSE_ULPS * np.finfo(float).eps * scale):
        raise NormalizationCollapse(f"weight sum {total:.3e} is numerically zero")
    return w / total


def default_lambda(m: int) -> float:
    return 0.01 / math.sqrt(m)


def _leading_eigenpairs(S: np.ndarray, rank: int):
    """Eigenpairs of symmetric ``S`` with the ``rank`` largest magnitudes.

    Ties in magnitude keep the solver's (ascending-eigenvalue) order.
    """
    n = S.shape[0]
    if n <= 2 * rank:
        vals, vecs = linalg.eigh(S)
        idx = np.arange(n)
    else:
        lo_v, lo_w = linalg.eigh(S, subset_by_index=[0, rank - 1], driver="evr")
        hi_v, hi_w = linalg.eigh(S, subset_by_index=[n - rank, n - 1], driver="evr")
        vals = np.concatenate([lo_v, hi_v])
        vecs = np.hstack([lo_w, hi_w])
        idx = np.concatenate([np.arange(rank), np.arange(n - rank, n)])
    order = np.lexsort((idx, -np.abs(vals)))[:rank]
    return vals[order], vecs[:, order]


def _fix_signs(V: np.ndarray) -> np.ndarray:
    pos = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pos, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def generalized_eigenpairs(LKL: np.ndarray, L: np.ndarray, rank: int):
    """Solve ``LKL a = w L a`` by Cholesky reduction of the ridged ``L``.

    Returns ``(A, omega)`` with ``omega = |w|`` in descending order and each
    column of ``A`` signed so its largest-magnitude entry is positive.
    """
    m = L.shape[0]
    delta = RIDGE_SCALE * np.trace(L) / m
    R = linalg.cholesky(L + delta * np.eye(m), lower=True)
    tmp = linalg.solve_triangular(R, LKL, lower=True)
    S = linalg.solve_triangular(R, tmp.T, lower=True)
    S = 0.5 * (S + S.T)
    w, Y = _leading_eigenpairs(S, rank)
    omega = np.abs(w)
    ceiling = omega[0] if omega.size else 0.0
    if omega.size < rank or ceiling <= 0 or np.sum(omega > EIG_RTOL * ceiling) < rank:
        raise RankError(f"fewer than {rank} generalized eigenvalues above tolerance")
    A = linalg.solve_triangular(R.T, Y, lower=False)
    return _fix_signs(A), omega


def train(triples: TrainingTriples, kernel: KernelConfig, rank: int = DEFAULT_RANK,
          lam: float | None = None) -> KshmmModel:
    """Fit the finite-sample KSHMM on sliding-window triples."""
    m = triples.m
    if rank < 1 or rank > m:
        raise InvalidInputError(f"rank must lie in 1..{m}, got {rank}")
    if lam is None:
        lam = default_lambda(m)
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidInputError("lambda must be positive")
    if np.ptp(triples.x2) == 0 or np.ptp(triples.x1) == 0:
        raise DegenerateDataError("training series is constant")

    K = gram_matrix(kernel, triples.x1, triples.x1)
    L = gram_matrix(kernel, triples.x2, triples.x2)
    G = gram_matrix(kernel, triples.x2, triples.x1)
    F = gram_matrix(kernel, triples.x2, triples.x3)

    LKL = L @ K @ L
    A, omega = generalized_eigenpairs(0.5 * (LKL + LKL.T), L, rank)
    quad = np.einsum("ij,ik,kj->j", A, L, A)
    if np.any(~np.isfinite(quad)) or np.any(quad <= 0):
        raise InvalidInputError("eigenvector scaling a'La is not positive")
    D = quad ** -0.5

    beta1 = D * (A.T @ G.sum(axis=1)) / m
    Q = K @ (L @ (A * (D / omega)))
    chol = linalg.cholesky(L + lam * np.eye(m), lower=True)
    return KshmmModel(kernel=kernel, lam=float(lam), rank=rank, A=A, omega=omega, D=D, Q=Q,
                      beta1=beta1, chol=chol, F=F, x2=triples.x2.copy())


def fit(series, rank: int = DEFAULT_RANK, lam: float | None = None,
        sigma: float | None = None) -> KshmmModel:
    """Train from a raw series with the median-heuristic bandwidth and
    ``lam = 0.01 / sqrt(m)`` unless overridden."""
    s = np.asarray(series, dtype=float)
    if sigma is None:
        sigma = median_heuristic(s)
    return train(reshape_sliding(s), KernelConfig(sigma=sigma), rank=rank, lam=lam)


def similarity_weights(model: KshmmModel, x: float) -> np.ndarray:
    """``n((L + lam I)^{-1} n(k2(x)))``."""
    if not math.isfinite(x):
        raise InvalidInputError("observation must be finite")
    k2 = normalize(kernel_vector(model.kernel, model.x2, x))
    return normalize(linalg.cho_solve((model.chol, True), k2))


def observation_operator_matrix(model: KshmmModel, x: float) -> np.ndarray:
    """The ``N x N`` operator for observation ``x``."""
    w = similarity_weights(model, x)
    B = (model.readout * w[None, :]) @ model.Q
    if not np.all(np.isfinite(B)):
        raise NormalizationCollapse("observation operator is not finite")
    return B


def filter_init(model: KshmmModel) -> BeliefState:
    return BeliefState(normalize(model.beta1))


def filter_update(model: KshmmModel, belief: BeliefState, x: float) -> BeliefState:
    """Condition the belief on one more observation."""
    return BeliefState(normalize(observation_operator_matrix(model, x) @ belief.b))


def predictive_weights(model: KshmmModel, belief: BeliefState) -> np.ndarray:
    eta = normalize(model.Q @ belief.b)
    if eta.shape != (model.m,):
        raise InvalidInputError("weight vector has wrong length")
    return eta


def predictive_mean(eta, x2) -> float:
    eta = np.asarray(eta, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if eta.shape != x2.shape:
        raise InvalidInputError("eta and x2 lengths differ")
    return float(eta @ x2)


def predictive_variance(eta, x2, xi: float) -> float:
    """Plug-in variance ``sum eta_l (x2_l - xi)^2``; negative for some signed weights."""
    eta = np.asarray(eta, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if eta.shape != x2.shape:
        raise InvalidInputError("eta and x2 lengths differ")
    return float(eta @ (x2 - xi) ** 2)


def mode_estimate(kernel: KernelConfig, eta, x2, tol: float = MODE_TOL,
                  max_iter: int = MODE_MAX_ITER) -> tuple[float, bool, int]:
    """Fixed-point (mean-shift) search for the maximizer of ``sum eta_l k(x2_l, x)``.

    Starts from the training point with the largest weight. Returns
    ``(x, converged, iterations)``; a vanishing denominator returns the
    starting point as non-converged.
    """
    eta = np.asarray(eta, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    start = float(x2[int(np.argmax(eta))])
    x = start
    inv2s2 = 1.0 / (2.0 * kernel.sigma**2)
    for it in range(1, max_iter + 1):
        wk = eta * np.exp(-((x2 - x) ** 2) * inv2s2)
        denom = wk.sum()
        if not abs(denom) >= MODE_DENOM_TOL:
            return start, False, it
        x_new = float(wk @ x2 / denom)
        if not math.isfinite(x_new):
            return start, False, it
        if abs(x_new - x) < tol * max(1.0, abs(x)):
            return x_new, True, it
        x = x_new
    return x, False, max_iter


def forecast(model: KshmmModel, belief: BeliefState) -> ForecastDistribution:
    """Predictive weights, mean, variance and mode for the next observation."""
    eta = predictive_weights(model, belief)
    xi = predictive_mean(eta, model.x2)
    var = predictive_variance(eta, model.x2, xi)
    mode, ok, its = mode_estimate(model.kernel, eta, model.x2)
    return ForecastDistribution(eta=eta, mean=xi, variance=var, mode=mode,
                                mode_converged=ok, mode_iterations=its)


def save_model(model: KshmmModel, path) -> None:
    """Write every model array to an ``.npz`` archive (exact float64)."""
    with open(Path(path), "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(FORMAT_VERSION),
            family=np.array(model.kernel.family),
            sigma=np.float64(model.kernel.sigma),
            lam=np.float64(model.lam),
            rank=np.int64(model.rank),
            A=model.A, omega=model.omega, D=model.D, Q=model.Q, beta1=model.beta1,
            chol=model.chol, F=model.F, x2=model.x2,
        )


def load_model(path) -> KshmmModel:
    try:
        z = np.load(Path(path), allow_pickle=False)
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"{path}: not a model archive ({exc})") from None
    with z:
        try:
            version = int(z["format_version"])
            if version != FORMAT_VERSION:
                raise InvalidInputError(f"unsupported model format version {version}")
            kernel = KernelConfig(sigma=float(z["sigma"]), family=str(z["family"]))
            return KshmmModel(kernel=kernel, lam=float(z["lam"]), rank=int(z["rank"]),
                              A=z["A"], omega=z["omega"], D=z["D"], Q=z["Q"], beta1=z["beta1"],
                              chol=z["chol"], F=z["F"], x2=z["x2"])
        except KeyError as exc:
            raise DataFormatError(f"{path}: model archive lacks {exc}") from None
