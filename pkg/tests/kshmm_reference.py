"""Monolithic, literal transcription of the finite-sample KSHMM recipe.

Deliberately shares no code with the package: explicit inverses, a full
dense eigendecomposition, every Gram matrix rebuilt from scratch.
"""
import numpy as np


def rbf(a, b, sigma):
    a = np.asarray(a, float)[:, None]
    b = np.asarray(b, float)[None, :]
    return np.exp(-((a - b) ** 2) / (2 * sigma**2))


def n(w):
    return w / np.sum(w)


def reference_pipeline(series, sigma, lam, N, observations):
    s = np.asarray(series, float)
    x1, x2, x3 = s[:-2], s[1:-1], s[2:]
    m = x1.size
    K = rbf(x1, x1, sigma)
    L = rbf(x2, x2, sigma)
    G = rbf(x2, x1, sigma)
    F = rbf(x2, x3, sigma)

    # generalized problem L K L a = w L a: ridge L, reduce with its
    # Cholesky factor R to the symmetric matrix R^-1 (LKL) R^-T
    delta = 1e-10 * np.trace(L) / m
    LKL = L @ K @ L
    LKL = 0.5 * (LKL + LKL.T)
    R = np.linalg.cholesky(L + delta * np.eye(m))
    Rinv = np.linalg.inv(R)
    S = Rinv @ LKL @ Rinv.T
    w, Y = np.linalg.eigh(0.5 * (S + S.T))
    order = sorted(range(m), key=lambda i: (-abs(w[i]), i))[:N]
    omega = np.abs(w[order])
    A = Rinv.T @ Y[:, order]
    for j in range(N):
        k = np.argmax(np.abs(A[:, j]))
        if A[k, j] < 0:
            A[:, j] = -A[:, j]

    D = np.diag([1.0 / np.sqrt(A[:, j] @ L @ A[:, j]) for j in range(N)])
    beta1 = (1.0 / m) * D.T @ A.T @ G @ np.ones(m)
    Q = K @ L @ A @ D @ np.linalg.inv(np.diag(omega))
    inv_reg = np.linalg.inv(L + lam * np.eye(m))

    def B(x):
        k2 = rbf(x2, [x], sigma)[:, 0]
        return (1.0 / m) * D.T @ A.T @ F @ np.diag(n(inv_reg @ n(k2))) @ Q

    b = n(beta1)
    beliefs = [b]
    for x in observations:
        b = n(B(x) @ b)
        beliefs.append(b)
    eta = n(Q @ b)
    return {
        "A": A, "omega": omega, "D": np.diag(D), "Q": Q, "beta1": beta1,
        "beliefs": beliefs, "eta": eta, "B": B,
    }
