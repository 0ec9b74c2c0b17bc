from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from gpopf.caseio.model import NetworkCase
from gpopf.domain.errors import InputDimensionError, SampleBudgetError
from gpopf.domain.models import OracleConfig, SampleDistribution
from gpopf.popf.oracle import output_matrix, solve_inputs
from gpopf.popf.sampling import SeedLike, child_seeds, draw, redraw_uniform
from gpopf.popf.uncertainty import UncertaintySpec

logger = logging.getLogger(__name__)

REJECTION_BUDGET = 0.2


def output_names(case: NetworkCase) -> list[str]:
    """cost, then pg and qg per generator (case order), then vm per bus."""
    gens = [f"g{k}@{g.bus}" for k, g in enumerate(case.generators)]
    return (
        ["cost"]
        + [f"pg:{g}" for g in gens]
        + [f"qg:{g}" for g in gens]
        + [f"vm:{b.id}" for b in case.buses]
    )


def conventional_outputs(case: NetworkCase, kind: str = "pg") -> list[str]:
    """Output names of the in-service non-renewable generators for `kind` in {pg, qg}."""
    return [
        f"{kind}:g{k}@{g.bus}"
        for k, g in enumerate(case.generators)
        if g.status and not g.is_renewable
    ]


@dataclass(frozen=True, eq=False)
class TrainingSet:
    X: np.ndarray  # N x n, MW / MVAr
    Y: np.ndarray  # N x m
    output_names: list[str]
    input_labels: list[str]
    rejected: int = 0

    def __post_init__(self) -> None:
        if self.X.shape[0] != self.Y.shape[0]:
            raise InputDimensionError(f"{self.X.shape[0]} input rows but {self.Y.shape[0]} output rows")
        if self.Y.shape[1] != len(self.output_names):
            raise InputDimensionError(f"{self.Y.shape[1]} output columns but {len(self.output_names)} names")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.Y[:, self.output_names.index(name)]

    def subset(self, names: Sequence[str]) -> TrainingSet:
        """The same rows restricted to the named output columns."""
        cols = [self.output_names.index(n) for n in names]
        return TrainingSet(
            X=self.X, Y=self.Y[:, cols], output_names=list(names), input_labels=self.input_labels, rejected=self.rejected
        )

    def frame(self) -> pd.DataFrame:
        data = {label: self.X[:, j] for j, label in enumerate(self.input_labels)}
        data.update({name: self.Y[:, j] for j, name in enumerate(self.output_names)})
        return pd.DataFrame(data)


def build_training_set(
    case: NetworkCase,
    spec: UncertaintySpec,
    n: int,
    dist: SampleDistribution,
    oracle: OracleConfig,
    seed: SeedLike = 0,
    jobs: int = 1,
) -> TrainingSet:
    """Sample `n` inputs from `dist`, solve the OPF at each and keep converged rows.

    Non-converged rows are redrawn i.i.d. uniform inside the box until at most
    REJECTION_BUDGET * n replacements have been spent.
    """
    if n < 1:
        raise InputDimensionError(f"training set size must be positive, got {n}")
    draw_seed, redraw_seed = child_seeds(seed, 2)
    rng = np.random.default_rng(redraw_seed)
    allowed = math.floor(REJECTION_BUDGET * n)

    X = draw(dist, spec, n, draw_seed)
    Y, ok = output_matrix(solve_inputs(case, spec, X, oracle, jobs=jobs))
    rejected = 0
    while not ok.all():
        bad = np.flatnonzero(~ok)
        rejected += bad.size
        logger.info("training: %d non-converged samples redrawn (%d/%d of budget)", bad.size, rejected, allowed)
        if rejected > allowed:
            raise SampleBudgetError(rejected, allowed)
        X[bad] = redraw_uniform(spec, bad.size, rng)
        Y[bad], ok[bad] = output_matrix(solve_inputs(case, spec, X[bad], oracle, jobs=jobs))

    logger.info("training set: %d samples, %d outputs, %d rejected", n, Y.shape[1], rejected)
    return TrainingSet(X=X, Y=Y, output_names=output_names(case), input_labels=spec.labels(), rejected=rejected)
