from __future__ import annotations

import logging
import threading

import numpy as np
from scipy import linalg

from gpopf.domain.errors import GpNumericalError

logger = logging.getLogger(__name__)


class _FactorizationCounter:
    def __init__(self) -> None:
        self._n = 0
        self._lock = threading.Lock()

    def increment(self) -> None:
        with self._lock:
            self._n += 1

    @property
    def value(self) -> int:
        return self._n

    def reset(self) -> None:
        with self._lock:
            self._n = 0


FACTORIZATIONS = _FactorizationCounter()


def jittered_cholesky(
    K: np.ndarray,
    scale: float = 1.0,
    jitter_start: float = 1e-10,
    jitter_max: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + jitter*I, escalating jitter x10 from jitter_start*scale.

    Returns (L, jitter) where jitter is the absolute amount added to the diagonal.
    """
    rel = jitter_start
    n = K.shape[0]
    while rel <= jitter_max * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = linalg.cholesky(K + jitter * np.eye(n), lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            logger.debug("cholesky failed with jitter %.1e; escalating", jitter)
            rel *= 10.0
            continue
        FACTORIZATIONS.increment()
        return L, jitter
    raise GpNumericalError(f"covariance matrix is not positive definite after jitter {jitter_max:.0e}")


def cholesky_with_jitter(K: np.ndarray, jitter: float) -> np.ndarray:
    """Factor K + jitter*I with a known jitter (used when restoring saved models)."""
    try:
        L = linalg.cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
    except linalg.LinAlgError as exc:
        raise GpNumericalError(f"stored covariance is not positive definite: {exc}") from None
    FACTORIZATIONS.increment()
    return L
