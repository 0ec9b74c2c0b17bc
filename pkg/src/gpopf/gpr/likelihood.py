from __future__ import annotations

import math
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from gpopf.gpr.kernel import Hyperparameters, sq_dists
from gpopf.gpr.linalg import jittered_cholesky

_LOG_2PI = math.log(2.0 * math.pi)


def _cho_inverse(L: np.ndarray) -> np.ndarray:
    """(L L')^-1 from the lower factor."""
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        return linalg.cho_solve((L, True), np.eye(L.shape[0]))
    return np.tril(inv) + np.tril(inv, -1).T


def log_marginal_likelihood(
    x: np.ndarray,
    y: np.ndarray,
    hp: Hyperparameters,
    jitter_start: float = 1e-10,
    jitter_max: float = 1e-6,
    *,
    dists: Optional[np.ndarray] = None,
) -> tuple[float, np.ndarray]:
    """log p(y | X, hp) and its gradient w.r.t. (log l, log sigma_f, log sigma_n).

    The jitter is proportional to sigma_f^2 and is differentiated along with it.
    `dists` takes the squared distances of x when the caller evaluates many hyperparameters.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = y.shape[0]

    D = sq_dists(x, x) if dists is None else dists
    K = hp.sigma_f**2 * np.exp(-D / (2.0 * hp.l**2))
    sn2 = hp.sigma_n**2
    L, jitter = jittered_cholesky(
        K + sn2 * np.eye(n), scale=hp.sigma_f**2, jitter_start=jitter_start, jitter_max=jitter_max
    )

    alpha = linalg.cho_solve((L, True), y)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * _LOG_2PI

    W = np.outer(alpha, alpha) - _cho_inverse(L)
    trace_w = float(np.trace(W))
    grad = np.array([
        0.5 * float(np.sum(W * K * D)) / hp.l**2,
        float(np.sum(W * K)) + jitter * trace_w,
        sn2 * trace_w,
    ])
    return value, grad
