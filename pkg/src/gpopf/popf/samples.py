from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import pandas as pd

from gpopf.domain.errors import InputDimensionError
from gpopf.popf.report import QUANTILES, DistributionSummary, OutputSummary
from gpopf.popf.sampling import checksum


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Per-sample outputs over one input matrix, from the surrogates (gp) or direct solves (mcs).

    `valid` marks rows that produced an output; invalid rows hold NaN and are dropped pairwise.
    """

    X: np.ndarray  # S x n
    Y: np.ndarray  # S x m, means for gp
    output_names: list[str]
    source: Literal["gp", "mcs"]
    label: str = ""
    variance: Optional[np.ndarray] = None  # S x m, gp only
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.Y.shape != (self.X.shape[0], len(self.output_names)):
            raise InputDimensionError(
                f"outputs have shape {self.Y.shape}, expected ({self.X.shape[0]}, {len(self.output_names)})"
            )
        if self.valid is None:
            object.__setattr__(self, "valid", np.ones(self.X.shape[0], dtype=bool))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def checksum(self) -> str:
        return checksum(self.X)

    def column(self, name: str) -> np.ndarray:
        return self.Y[:, self.output_names.index(name)]

    def columns(self, prefix: str) -> list[int]:
        return [j for j, name in enumerate(self.output_names) if name.startswith(prefix)]

    def frame(self, input_labels: list[str]) -> pd.DataFrame:
        """Inputs, outputs and (gp) standard deviations as one table."""
        data = {label: self.X[:, j] for j, label in enumerate(input_labels)}
        data.update({name: self.Y[:, j] for j, name in enumerate(self.output_names)})
        if self.variance is not None:
            data.update({f"std:{name}": np.sqrt(self.variance[:, j]) for j, name in enumerate(self.output_names)})
        frame = pd.DataFrame(data)
        if self.source == "mcs":
            frame.insert(0, "converged", self.valid)
        return frame


def summarize(samples: SampleSet) -> DistributionSummary:
    """Mean, std, quantiles per output over the valid rows, plus mean +- 3 sigma limits for gp samples."""
    rows = samples.valid
    Y = samples.Y[rows]
    outputs = []
    for j, name in enumerate(samples.output_names):
        col = Y[:, j]
        q = np.quantile(col, QUANTILES) if col.size else np.full(len(QUANTILES), np.nan)
        lower = upper = None
        if samples.variance is not None and col.size:
            sd = np.sqrt(samples.variance[rows, j])
            lower = float(np.min(col - 3.0 * sd))
            upper = float(np.max(col + 3.0 * sd))
        outputs.append(
            OutputSummary(
                name=name,
                mean=float(np.mean(col)) if col.size else float("nan"),
                std=float(np.std(col, ddof=1)) if col.size > 1 else 0.0,
                q01=float(q[0]), q05=float(q[1]), q50=float(q[2]), q95=float(q[3]), q99=float(q[4]),
                lower_limit=lower,
                upper_limit=upper,
            )
        )
    return DistributionSummary(
        label=samples.label,
        source=samples.source,
        n_samples=int(rows.sum()),
        checksum=samples.checksum,
        outputs=outputs,
    )
