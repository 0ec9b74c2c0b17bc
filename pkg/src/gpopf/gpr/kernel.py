from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class Hyperparameters:
    l: float  # length scale, isotropic
    sigma_f: float  # signal scale
    sigma_n: float  # noise standard deviation

    def __post_init__(self) -> None:
        if not self.l > 0:
            raise ValueError(f"length scale must be positive, got {self.l}")
        if not self.sigma_f > 0:
            raise ValueError(f"sigma_f must be positive, got {self.sigma_f}")
        if not self.sigma_n >= 0:
            raise ValueError(f"sigma_n must be nonnegative, got {self.sigma_n}")

    def to_log(self) -> np.ndarray:
        sn = math.log(self.sigma_n) if self.sigma_n > 0 else -math.inf
        return np.array([math.log(self.l), math.log(self.sigma_f), sn])

    @classmethod
    def from_log(cls, theta: np.ndarray) -> Hyperparameters:
        return cls(l=float(np.exp(theta[0])), sigma_f=float(np.exp(theta[1])), sigma_n=float(np.exp(theta[2])))


def kernel(xi: np.ndarray, xj: np.ndarray, hp: Hyperparameters) -> float:
    """Squared exponential covariance sigma_f^2 * exp(-|xi - xj|^2 / (2 l^2))."""
    d = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    return hp.sigma_f**2 * math.exp(-float(d @ d) / (2.0 * hp.l**2))


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")


def kernel_matrix(a: np.ndarray, b: np.ndarray, hp: Hyperparameters) -> np.ndarray:
    return hp.sigma_f**2 * np.exp(-sq_dists(a, b) / (2.0 * hp.l**2))
