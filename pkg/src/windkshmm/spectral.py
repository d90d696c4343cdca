"""Spectral learning of discrete HMMs and the exact forward recursion.

Conventions: matrices are column-stochastic, ``T[i, j] = P(H' = i | H = j)``
and ``O[i, j] = P(X = i | H = j)``. Observation symbols are 0-based
integers ``0 .. M-1``.

The module serves as a small, exact testbed for the observable-operator
machinery that the kernel version generalises.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ErgodicityError,
    ImpossibleEvidenceError,
    InsufficientDataError,
    InvalidInputError,
    NormalizationCollapse,
    RankError,
)

_STOCH_TOL = 1e-12
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class DiscreteHmm:
    T: np.ndarray
    O: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        O = np.asarray(self.O, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        n = T.shape[0]
        if T.shape != (n, n) or O.ndim != 2 or O.shape[1] != n or pi.shape != (n,):
            raise InvalidInputError("inconsistent HMM dimensions")
        for name, mat in (("T", T), ("O", O)):
            if np.any(mat < 0) or np.any(np.abs(mat.sum(axis=0) - 1) > _STOCH_TOL):
                raise InvalidInputError(f"{name} must be column-stochastic")
        if np.any(pi < 0) or abs(pi.sum() - 1) > _STOCH_TOL:
            raise InvalidInputError("pi must be a probability vector")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "O", O)
        object.__setattr__(self, "pi", pi)

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.O.shape[0]


@dataclass(frozen=True)
class SpectralModel:
    """Observable representation ``(b1, b_inf, B)``.

    ``B`` has shape ``(M, N, N)``; ``B[x]`` is the operator for symbol ``x``.
    ``U`` is kept for diagnostics.
    """

    b1: np.ndarray
    b_inf: np.ndarray
    B: np.ndarray
    U: np.ndarray


def _check_symbol(x, M):
    if not (0 <= int(x) < M) or int(x) != x:
        raise InvalidInputError(f"symbol {x!r} outside 0..{M - 1}")
    return int(x)


def observation_operator(hmm: DiscreteHmm, x: int) -> np.ndarray:
    """``A_x = T diag(O[x, :])``."""
    x = _check_symbol(x, hmm.n_symbols)
    return hmm.T * hmm.O[x][None, :]


def forward_predict(hmm: DiscreteHmm, obs) -> np.ndarray:
    """Exact ``P(X_{t+1} = . | x_{1:t})`` by the normalized forward recursion."""
    state = hmm.pi.copy()
    for x in obs:
        state = observation_operator(hmm, x) @ state
        total = state.sum()
        if total <= 0:
            raise ImpossibleEvidenceError("observation sequence has zero probability")
        state /= total
    p = hmm.O @ state
    return p / p.sum()


def stationary_distribution(T: np.ndarray) -> np.ndarray:
    """Unique stationary vector of a column-stochastic ``T``.

    Raises ErgodicityError unless 1 is a simple eigenvalue and every other
    eigenvalue lies strictly inside the unit circle.
    """
    vals, vecs = np.linalg.eig(T)
    order = np.argsort(np.abs(vals - 1.0))
    lead = order[0]
    if abs(vals[lead] - 1.0) > 1e-9:
        raise ErgodicityError("transition matrix has no eigenvalue 1")
    others = np.delete(vals, lead)
    if others.size and np.max(np.abs(others)) > 1.0 - 1e-9:
        raise ErgodicityError("stationary distribution is not unique (chain not ergodic)")
    v = np.real(vecs[:, lead])
    v = v / v.sum()
    return np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()


def population_moments(hmm: DiscreteHmm, state_marginal=None):
    """Exact unigram, pair and triple moments under the stationary state law.

    Returns ``(u, C21, C3x1)`` with ``C3x1`` of shape ``(M, M, M)`` where
    ``C3x1[x][i, j] = P(X_{t+2}=i, X_{t+1}=x, X_t=j)``.
    """
    if state_marginal is None:
        h = stationary_distribution(hmm.T)
    else:
        h = np.asarray(state_marginal, dtype=float)
    O, T = hmm.O, hmm.T
    u = O @ h
    C21 = O @ T @ np.diag(h) @ O.T
    C3x1 = np.stack(
        [O @ observation_operator(hmm, x) @ T @ np.diag(h) @ O.T for x in range(hmm.n_symbols)]
    )
    return u, C21, C3x1


def empirical_moments(obs, M: int):
    """Frequency estimates of ``(u, C21, C3x1)`` from one symbol sequence.

    Each table is normalized by its own window count (``n``, ``n-1``, ``n-2``).
    """
    x = np.asarray(obs, dtype=int)
    if x.size < 3:
        raise InsufficientDataError("need at least 3 observations")
    if x.min() < 0 or x.max() >= M:
        raise InvalidInputError("symbol out of range")
    n = x.size
    u = np.bincount(x, minlength=M) / n
    C21 = np.zeros((M, M))
    np.add.at(C21, (x[1:], x[:-1]), 1.0)
    C21 /= n - 1
    C3x1 = np.zeros((M, M, M))
    np.add.at(C3x1, (x[1:-1], x[2:], x[:-2]), 1.0)
    C3x1 /= n - 2
    return u, C21, C3x1


def _fix_signs(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def spectral_train(u, C21, C3x1, N: int, rotation=None) -> SpectralModel:
    """Observable operators from moments using the top-``N`` left singular
    vectors of ``C21``.

    ``rotation`` (an orthogonal ``N x N`` matrix) optionally rotates the
    singular basis; predictions must not depend on it.
    """
    u = np.asarray(u, dtype=float)
    C21 = np.asarray(C21, dtype=float)
    C3x1 = np.asarray(C3x1, dtype=float)
    M = u.shape[0]
    if C21.shape != (M, M) or C3x1.shape != (M, M, M):
        raise InvalidInputError("moment dimensions are inconsistent")
    if N < 1:
        raise InvalidInputError("rank must be positive")
    U_full, s, _ = np.linalg.svd(C21)
    rank = int(np.sum(s > PINV_RTOL * s[0])) if s.size and s[0] > 0 else 0
    if N > rank:
        raise RankError(f"rank {N} exceeds numerical rank {rank} of C21")
    U = _fix_signs(U_full[:, :N])
    if rotation is not None:
        U = U @ np.asarray(rotation, dtype=float)
    pinv = np.linalg.pinv(U.T @ C21, rcond=PINV_RTOL)
    b1 = U.T @ u
    b_inf = C21 @ pinv
    B = np.einsum("ni,xij,jk->xnk", U.T, C3x1, pinv)
    return SpectralModel(b1=b1, b_inf=b_inf, B=B, U=U)


def spectral_predict(model: SpectralModel, obs) -> np.ndarray:
    """Normalized ``b_inf B_{x_t} ... B_{x_1} b1``.

    The internal state is rescaled after every operator by the implied
    prefix probability, which leaves the normalized output unchanged.
    """
    M = model.b_inf.shape[0]
    ones_inf = model.b_inf.sum(axis=0)
    state = model.b1.copy()
    for x in obs:
        state = model.B[_check_symbol(x, M)] @ state
        z = ones_inf @ state
        if not z > 0:
            raise NormalizationCollapse("spectral state lost positive mass")
        state = state / z
    p = model.b_inf @ state
    total = p.sum()
    if not total > 0:
        raise NormalizationCollapse("spectral predictive vector has non-positive mass")
    return p / total


def random_hmm(rng: np.random.Generator, n_states: int, n_symbols: int, max_cond: float = 1e3,
               max_tries: int = 1000) -> DiscreteHmm:
    """Flat-Dirichlet HMM with ``cond(O) <= max_cond`` and stationary ``pi``."""
    for _ in range(max_tries):
        T = rng.dirichlet(np.ones(n_states), size=n_states).T
        O = rng.dirichlet(np.ones(n_symbols), size=n_states).T
        if np.linalg.cond(O) > max_cond:
            continue
        try:
            pi = stationary_distribution(T)
        except ErgodicityError:
            continue
        return DiscreteHmm(T=T, O=O, pi=pi)
    raise RuntimeError("could not draw a well-conditioned HMM")
