"""Gaussian RBF kernel, bandwidth selection and Gram matrices.

Inputs are either 1-d arrays of scalars or 2-d arrays whose rows are
vectors (the SVR lag windows). For vector inputs the kernel is the
product-form RBF ``exp(-||x - y||^2 / (2 sigma^2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DegenerateDataError, InvalidInputError

GAUSSIAN_RBF = "gaussian_rbf"


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family and bandwidth ``sigma`` (same units as the data)."""

    sigma: float
    family: str = GAUSSIAN_RBF

    def __post_init__(self):
        if self.family != GAUSSIAN_RBF:
            raise InvalidInputError(f"unsupported kernel family {self.family!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"bandwidth must be positive and finite, got {self.sigma}")


def evaluate(cfg: KernelConfig, x: float, y: float) -> float:
    """Return ``exp(-(x - y)^2 / (2 sigma^2))`` for two scalars."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidInputError("kernel arguments must be finite")
    return math.exp(-((x - y) ** 2) / (2.0 * cfg.sigma**2))


def median_heuristic(data) -> float:
    """Median of all pairwise distances ``|x_i - x_j|``, ``i < j``.

    An even number of pairs gives the mean of the two middle values.
    All pairs are enumerated exactly.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InvalidInputError("median heuristic needs at least two points")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("data must be finite")
    # in one dimension cityblock is |x - y| exactly; euclidean squares and can underflow
    metric = "cityblock" if x.shape[1] == 1 else "euclidean"
    med = float(np.median(pdist(x, metric=metric)))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise distance is zero (constant data)")
    return med


def _as_points(X, name):
    a = np.asarray(X, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def gram_matrix(cfg: KernelConfig, X, Y) -> np.ndarray:
    """Kernel matrix with entry ``(i, j) = k(X[i], Y[j])``."""
    a = _as_points(X, "X")
    b = _as_points(Y, "Y")
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError("X and Y have different input dimensions")
    sq = cdist(a, b, metric="sqeuclidean")
    return np.exp(-sq / (2.0 * cfg.sigma**2))


def kernel_vector(cfg: KernelConfig, X, query) -> np.ndarray:
    """Similarities ``k(X[l], query)`` for every training point ``l``."""
    return gram_matrix(cfg, X, np.atleast_1d(np.asarray(query, dtype=float))[None, ...])[:, 0]
