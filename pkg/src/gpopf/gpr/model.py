from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import minimize

from gpopf.domain.errors import GpFitError, GpNumericalError, InputDimensionError
from gpopf.domain.models import FitOptions
from gpopf.gpr.kernel import Hyperparameters, kernel_matrix, sq_dists
from gpopf.gpr.likelihood import log_marginal_likelihood
from gpopf.gpr.linalg import jittered_cholesky

logger = logging.getLogger(__name__)

_FAILED = 1e25  # objective value reported for hyperparameters whose covariance cannot be factored
_CHUNK = 256  # test rows per triangular solve; partial chunks are zero-padded to this width


@dataclass(frozen=True, eq=False)
class Scaler:
    """Affine standardization z = (v - mean) / scale."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> Scaler:
        values = np.asarray(values, dtype=float)
        mean = values.mean(axis=0)
        scale = values.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=np.atleast_1d(mean), scale=np.atleast_1d(scale))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.scale

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.scale + self.mean


@dataclass(frozen=True)
class Prediction:
    """Predictive mean and variance; scalars from predict, length-S arrays from predict_batch."""

    mean: float | np.ndarray
    variance: float | np.ndarray

    @property
    def std(self) -> float | np.ndarray:
        return np.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class GpModel:
    hp: Hyperparameters
    x_train: np.ndarray  # standardized, N x n
    y_train: np.ndarray  # standardized, N
    alpha: np.ndarray
    chol: np.ndarray  # lower factor of K + (sigma_n^2 + jitter) I
    x_scaler: Scaler
    y_scaler: Scaler
    lml: float
    jitter: float
    constant: bool = False  # no residual GP: predictions are the trend, variance 0
    output_name: str = ""
    trend: Optional[np.ndarray] = None  # [intercept, slopes] on standardized inputs; None is a zero mean

    def prior_mean(self, xs: np.ndarray) -> np.ndarray:
        """Standardized prior mean at standardized rows xs."""
        if self.trend is None:
            return np.zeros(xs.shape[0])
        return self.trend[0] + np.sum(xs * self.trend[1:], axis=1)

    @property
    def n_inputs(self) -> int:
        return self.x_train.shape[1]

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        trend = self.trend if self.trend is not None else np.zeros(0)
        for a in (self.x_train, self.y_train, self.alpha, self.x_scaler.mean, self.x_scaler.scale,
                  self.y_scaler.mean, self.y_scaler.scale, self.hp.to_log(), trend):
            h.update(np.ascontiguousarray(a, dtype=float).tobytes())
        return h.hexdigest()


def build_model(
    hp: Hyperparameters,
    xs: np.ndarray,
    ys: np.ndarray,
    x_scaler: Scaler,
    y_scaler: Scaler,
    opts: FitOptions | None = None,
    *,
    constant: bool = False,
    output_name: str = "",
    trend: Optional[np.ndarray] = None,
) -> GpModel:
    """Factor the covariance at fixed hyperparameters and precompute alpha (standardized data).

    `ys` holds the standardized targets minus the prior mean given by `trend`.
    """
    opts = opts or FitOptions()
    n = xs.shape[0]
    K = kernel_matrix(xs, xs, hp) + hp.sigma_n**2 * np.eye(n)
    L, jitter = jittered_cholesky(K, scale=hp.sigma_f**2, jitter_start=opts.jitter_start, jitter_max=opts.jitter_max)
    alpha = linalg.cho_solve((L, True), ys)
    lml = -0.5 * float(ys @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * math.log(2 * math.pi)
    return GpModel(
        hp=hp, x_train=xs, y_train=ys, alpha=alpha, chol=L, x_scaler=x_scaler, y_scaler=y_scaler,
        lml=lml, jitter=jitter, constant=constant, output_name=output_name, trend=trend,
    )


def _affine_trend(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Least-squares [intercept, slopes] of ys on xs."""
    H = np.column_stack([np.ones(xs.shape[0]), xs])
    coef, *_ = np.linalg.lstsq(H, ys, rcond=None)
    return coef


def _initial_theta(dists: np.ndarray, spread: float) -> np.ndarray:
    """Log (l, sigma_f, sigma_n) guessed from the data: median pairwise distance and target spread."""
    d = np.sqrt(dists[np.triu_indices_from(dists, k=1)])
    d = d[d > 0]
    l0 = float(np.median(d)) if d.size else 1.0
    sf0 = max(spread, 1e-3)
    return np.log([l0, sf0, 1e-2 * sf0])


def fit(
    x_train: np.ndarray,
    y_train: np.ndarray,
    opts: FitOptions | None = None,
    seed: int | np.random.SeedSequence | None = 0,
    output_name: str = "",
) -> GpModel:
    """Standardize, then maximize the log marginal likelihood over `opts.restarts` starts.

    The first start is guessed from the data, the rest are drawn log-uniformly from the
    init ranges. With opts.mean == "linear" the GP models what an affine trend leaves over.
    """
    opts = opts or FitOptions()
    x = np.atleast_2d(np.asarray(x_train, dtype=float))
    y = np.asarray(y_train, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise GpFitError(f"{x.shape[0]} input rows but {y.shape[0]} targets", output_name)
    if y.shape[0] < 1:
        raise GpFitError("no training data", output_name)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise GpFitError("training data contains non-finite values", output_name)

    x_scaler = Scaler.fit(x)
    xs = x_scaler.transform(x)
    n, d = xs.shape
    flat_hp = Hyperparameters(l=opts.l_bounds[1], sigma_f=opts.sigma_f_bounds[0], sigma_n=opts.sigma_n_floor)

    level = float(np.mean(y))
    if n < 2 or float(np.std(y)) <= opts.constant_rtol * max(1.0, abs(level)):
        logger.warning("%s: target is constant (%.6g); using a constant model", output_name or "output", level)
        y_scaler = Scaler(mean=np.array([level]), scale=np.array([1.0]))
        return build_model(flat_hp, xs, np.zeros_like(y), x_scaler, y_scaler, opts, constant=True,
                           output_name=output_name)

    y_scaler = Scaler.fit(y)
    ys = y_scaler.transform(y)

    trend = None
    if opts.mean == "linear":
        if n > d + 1:
            trend = _affine_trend(xs, ys)
        else:
            logger.debug("%s: %d samples cannot fit a trend in %d inputs; zero mean", output_name, n, d)
    resid = ys if trend is None else ys - trend[0] - xs @ trend[1:]
    spread = float(np.std(resid))
    if spread <= opts.constant_rtol:
        logger.info("%s: target is affine in the inputs; using the trend alone", output_name or "output")
        return build_model(flat_hp, xs, np.zeros_like(ys), x_scaler, y_scaler, opts, constant=True,
                           output_name=output_name, trend=trend)

    lo = np.log([opts.l_bounds[0], opts.sigma_f_bounds[0], max(opts.sigma_n_bounds[0], opts.sigma_n_floor)])
    hi = np.log([opts.l_bounds[1], opts.sigma_f_bounds[1], opts.sigma_n_bounds[1]])
    init_lo = np.log([opts.l_init[0], opts.sigma_f_init[0], opts.sigma_n_init[0]])
    init_hi = np.log([opts.l_init[1], opts.sigma_f_init[1], opts.sigma_n_init[1]])
    dists = sq_dists(xs, xs)

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            value, grad = log_marginal_likelihood(
                xs, resid, Hyperparameters.from_log(theta), opts.jitter_start, opts.jitter_max, dists=dists
            )
        except GpNumericalError:
            return _FAILED, np.zeros(3)
        if not np.isfinite(value):
            return _FAILED, np.zeros(3)
        return -value, -grad

    rng = np.random.default_rng(seed)
    best_theta, best_value = None, -np.inf
    for r in range(opts.restarts):
        start = _initial_theta(dists, spread) if r == 0 else rng.uniform(init_lo, init_hi)
        theta0 = np.clip(start, lo, hi)
        res = minimize(
            objective, theta0, jac=True, method="L-BFGS-B",
            bounds=list(zip(lo, hi, strict=True)), options={"maxiter": opts.max_iter},
        )
        value = -float(res.fun)
        if res.fun >= _FAILED or not np.isfinite(value):
            logger.debug("%s: restart %d failed (%s)", output_name, r, res.message)
            continue
        logger.debug("%s: restart %d lml=%.6g theta=%s", output_name, r, value, np.exp(res.x))
        if value > best_value:
            best_theta, best_value = np.asarray(res.x, dtype=float), value

    if best_theta is None:
        raise GpFitError(f"all {opts.restarts} restarts failed to factor the covariance", output_name)

    hp = Hyperparameters.from_log(best_theta)
    return build_model(hp, xs, resid, x_scaler, y_scaler, opts, output_name=output_name, trend=trend)


def bound_hits(model: GpModel, opts: FitOptions | None = None, rtol: float = 1e-6) -> list[str]:
    """Names of hyperparameters sitting on the optimizer box."""
    opts = opts or FitOptions()
    if model.constant:
        return []
    hits = []
    for name, value, (lo, hi) in (
        ("l", model.hp.l, opts.l_bounds),
        ("sigma_f", model.hp.sigma_f, opts.sigma_f_bounds),
        ("sigma_n", model.hp.sigma_n, (max(opts.sigma_n_bounds[0], opts.sigma_n_floor), opts.sigma_n_bounds[1])),
    ):
        if abs(math.log(value) - math.log(lo)) <= rtol or abs(math.log(value) - math.log(hi)) <= rtol:
            hits.append(name)
    return hits


def _predict_rows(model: GpModel, x_stars: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x_stars.shape[1] != model.n_inputs:
        raise InputDimensionError(f"model expects {model.n_inputs} inputs, got {x_stars.shape[1]}")
    s = x_stars.shape[0]
    y_mean, y_scale = float(model.y_scaler.mean[0]), float(model.y_scaler.scale[0])
    xs = model.x_scaler.transform(x_stars)
    prior = model.prior_mean(xs)
    if model.constant:
        return y_mean + y_scale * prior, np.zeros(s)

    sf2 = model.hp.sigma_f**2
    mean = np.empty(s)
    var = np.empty(s)
    # fixed-width blocks: a row's result is independent of the rest of its batch
    block = np.zeros((_CHUNK, model.n_inputs))
    for start in range(0, s, _CHUNK):
        stop = min(start + _CHUNK, s)
        block[: stop - start] = xs[start:stop]
        block[stop - start :] = 0.0
        ks = kernel_matrix(block, model.x_train, model.hp)
        v = linalg.solve_triangular(model.chol, ks.T, lower=True, check_finite=False)
        mean[start:stop] = np.sum(ks * model.alpha, axis=1)[: stop - start]
        var[start:stop] = sf2 - np.sum(v * v, axis=0)[: stop - start]
    mean += prior

    neg = var < 0
    if np.any(neg):
        worst = float(var.min())
        if worst < -1e-10 * sf2:
            raise GpNumericalError(f"negative predictive variance {worst:.3e} for {model.output_name or 'output'}")
        var[neg] = 0.0
    return y_mean + y_scale * mean, var * y_scale * y_scale


def predict(model: GpModel, x_star: np.ndarray) -> Prediction:
    x = np.asarray(x_star, dtype=float)
    if x.ndim != 1:
        raise InputDimensionError(f"expected a single input vector, got shape {x.shape}")
    mean, var = _predict_rows(model, x[None, :])
    return Prediction(mean=float(mean[0]), variance=float(var[0]))


def predict_batch(model: GpModel, x_stars: np.ndarray) -> Prediction:
    """Row-wise predict over an S x n matrix; kernel rows are computed for the whole batch at once."""
    x = np.asarray(x_stars, dtype=float)
    if x.ndim != 2:
        raise InputDimensionError(f"expected an S x n matrix, got shape {x.shape}")
    mean, var = _predict_rows(model, x)
    return Prediction(mean=mean, variance=var)
