from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from gpopf.domain.errors import GpFitError, GpNumericalError, InputDimensionError
from gpopf.domain.models import FitOptions, SampleDistribution
from gpopf.gpr.model import GpModel, bound_hits, fit, predict_batch
from gpopf.orchestrator.parallel import ordered_map
from gpopf.popf.samples import SampleSet
from gpopf.popf.sampling import SeedLike, child_seeds, draw
from gpopf.popf.training_set import TrainingSet
from gpopf.popf.uncertainty import UncertaintySpec

logger = logging.getLogger(__name__)


def _fit_column(
    x: np.ndarray, y: np.ndarray, opts: FitOptions, seed: np.random.SeedSequence, name: str
) -> GpModel:
    try:
        return fit(x, y, opts, seed=seed, output_name=name)
    except GpNumericalError as exc:
        raise GpFitError(str(exc), name) from None


def train_surrogates(
    ts: TrainingSet,
    opts: FitOptions | None = None,
    seed: SeedLike = 0,
    jobs: int = 1,
) -> list[GpModel]:
    """One independent GP per output column, returned in ts.output_names order."""
    opts = opts or FitOptions()
    seeds = child_seeds(seed, len(ts.output_names))
    tasks = ((ts.X, ts.Y[:, j], opts, seeds[j], name) for j, name in enumerate(ts.output_names))
    models = ordered_map(_fit_column, tasks, jobs=jobs)
    for m in models:
        hits = bound_hits(m, opts)
        if hits:
            logger.warning("%s: hyperparameters on the search bound: %s", m.output_name, ", ".join(hits))
        logger.debug(
            "%s: l=%.4g sigma_f=%.4g sigma_n=%.3g lml=%.6g",
            m.output_name, m.hp.l, m.hp.sigma_f, m.hp.sigma_n, m.lml,
        )
    logger.info("trained %d surrogates on %d samples", len(models), ts.n_samples)
    return models


def predict_samples(models: Sequence[GpModel], X: np.ndarray, label: str = "") -> SampleSet:
    """Evaluate every surrogate on the rows of X."""
    if not models:
        raise InputDimensionError("no surrogate models to evaluate")
    means = np.empty((X.shape[0], len(models)))
    variances = np.empty_like(means)
    for j, m in enumerate(models):
        pred = predict_batch(m, X)
        means[:, j] = pred.mean
        variances[:, j] = pred.variance
    return SampleSet(
        X=X, Y=means, variance=variances, output_names=[m.output_name for m in models], source="gp", label=label
    )


def propagate(
    models: Sequence[GpModel],
    spec: UncertaintySpec,
    dist: SampleDistribution,
    size: int,
    seed: SeedLike = 0,
) -> SampleSet:
    """Push `size` draws from `dist` through the trained surrogates; no OPF is solved."""
    X = draw(dist, spec, size, seed)
    samples = predict_samples(models, X, label=dist.label())
    logger.info("propagated %d %s samples through %d surrogates", size, dist.label(), len(models))
    return samples
