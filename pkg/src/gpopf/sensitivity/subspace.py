from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from gpopf.domain.errors import SensitivityError
from gpopf.gpr.model import GpModel
from gpopf.popf.report import SensitivityRow, SensitivitySummary
from gpopf.popf.samples import SampleSet

logger = logging.getLogger(__name__)

PINNED_DELTA = 1e-6  # output units


@dataclass(frozen=True)
class SensitivityRecord:
    output_name: str
    gamma: float  # l / sigma_f, standardized units
    delta: float  # max - min over the test samples, output units
    l: float
    sigma_f: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise SensitivityError(f"{self.output_name}: gamma must be positive, got {self.gamma}")
        if not self.delta >= 0:
            raise SensitivityError(f"{self.output_name}: delta must be nonnegative, got {self.delta}")

    @property
    def pinned(self) -> bool:
        """Output stuck at one value over the whole box; its rank carries no information."""
        return self.delta <= PINNED_DELTA


def gamma(model: GpModel) -> float:
    return model.hp.l / model.hp.sigma_f


def output_range(samples: Sequence[float] | np.ndarray) -> float:
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise SensitivityError("output range of an empty sample list")
    return float(values.max() - values.min())


def sensitivity_records(
    models: Sequence[GpModel], samples: SampleSet, output_names: Sequence[str]
) -> list[SensitivityRecord]:
    """One record per named output: gamma from its model, delta over the valid rows of `samples`."""
    by_name = {m.output_name: m for m in models}
    records = []
    for name in output_names:
        if name not in by_name:
            raise SensitivityError(f"no model for output {name}")
        model = by_name[name]
        col = samples.column(name)[samples.valid]
        records.append(
            SensitivityRecord(
                output_name=name,
                gamma=gamma(model),
                delta=output_range(col),
                l=model.hp.l,
                sigma_f=model.hp.sigma_f,
            )
        )
    return records


@dataclass(frozen=True, eq=False)
class InverseRelation:
    rho: float  # Spearman rank correlation of gamma against delta, all records
    rho_unpinned: float | None  # same without pinned records, None when fewer than 3 remain
    table: pd.DataFrame  # sorted by gamma

    @property
    def n_pinned(self) -> int:
        return int(self.table["pinned"].sum())


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    # a constant column has no ranking; report no correlation instead of NaN
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    rho = float(stats.spearmanr(a, b).statistic)
    return 0.0 if math.isnan(rho) else rho


def inverse_relation_report(records: Sequence[SensitivityRecord]) -> InverseRelation:
    """Spearman correlation between gamma and delta (average ranks for ties) and the sorted table."""
    if len(records) < 3:
        raise SensitivityError(f"need at least 3 records, got {len(records)}")
    table = pd.DataFrame(
        {
            "output_name": [r.output_name for r in records],
            "l": [r.l for r in records],
            "sigma_f": [r.sigma_f for r in records],
            "gamma": [r.gamma for r in records],
            "delta": [r.delta for r in records],
            "pinned": [r.pinned for r in records],
        }
    ).sort_values(["gamma", "output_name"], kind="mergesort", ignore_index=True)

    rho = _spearman(table["gamma"].to_numpy(), table["delta"].to_numpy())
    free = table[~table["pinned"]]
    rho_unpinned = _spearman(free["gamma"].to_numpy(), free["delta"].to_numpy()) if len(free) >= 3 else None
    if rho_unpinned is None and len(free) < len(table):
        logger.info("sensitivity: %d pinned outputs leave fewer than 3 informative records", len(table) - len(free))
    return InverseRelation(rho=rho, rho_unpinned=rho_unpinned, table=table)


def to_summary(relation: InverseRelation, outputs: str) -> SensitivitySummary:
    return SensitivitySummary(
        outputs=outputs,
        rho=relation.rho,
        rho_unpinned=relation.rho_unpinned,
        records=[
            SensitivityRow(
                output_name=row.output_name, l=row.l, sigma_f=row.sigma_f,
                gamma=row.gamma, delta=row.delta, pinned=bool(row.pinned),
            )
            for row in relation.table.itertuples()
        ],
    )
