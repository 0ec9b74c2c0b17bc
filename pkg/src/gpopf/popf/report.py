from __future__ import annotations

import math
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

QUANTILES = (0.01, 0.05, 0.5, 0.95, 0.99)


class OutputSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    mean: float
    std: float
    q01: float
    q05: float
    q50: float
    q95: float
    q99: float
    # probabilistic limits from the GP variance: min(mean - 3 sigma), max(mean + 3 sigma)
    lower_limit: Optional[float] = None
    upper_limit: Optional[float] = None


class DistributionSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    source: Literal["gp", "mcs"]
    n_samples: int
    checksum: str
    outputs: list[OutputSummary]

    def output(self, name: str) -> OutputSummary:
        for o in self.outputs:
            if o.name == name:
                return o
        raise KeyError(name)


class HistogramBin(BaseModel):
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    count: int


class L1Summary(BaseModel):
    """Per-sample %L1 error of one output vector (pg, vm, ...) over the paired samples."""

    model_config = ConfigDict(frozen=True)

    group: str
    mean: float = Field(ge=0)
    median: float = Field(ge=0)
    max: float = Field(ge=0)
    histogram: list[HistogramBin]


class SensitivityRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    output_name: str
    l: float
    sigma_f: float
    gamma: float
    delta: float
    pinned: bool


class SensitivitySummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    outputs: Literal["pg", "qg"]
    rho: float
    rho_unpinned: Optional[float] = None
    records: list[SensitivityRow]


class PopfReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_paired: int
    n_dropped: int
    cost_mean_gp: float
    cost_mean_mcs: float
    cost_std_gp: float
    cost_std_mcs: float
    cost_mean_error_pct: float
    cost_std_error_pct: float
    l1: list[L1Summary]
    gp: DistributionSummary
    mcs: DistributionSummary

    # filled in by the experiment pipeline
    experiment: str = ""
    case: str = ""
    seed: Optional[int] = None
    build: Optional[str] = None
    penetration_pct: Optional[float] = None
    n_train: Optional[int] = None
    rejected_training: Optional[int] = None
    hyperparameter_bound_hits: dict[str, list[str]] = Field(default_factory=dict)
    extra_distributions: list[DistributionSummary] = Field(default_factory=list)
    sensitivity: Optional[SensitivitySummary] = None
    config: dict[str, Any] = Field(default_factory=dict)

    @field_validator("cost_mean_error_pct", "cost_std_error_pct")
    @classmethod
    def _finite_nonnegative(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"error metric must be finite and nonnegative, got {v}")
        return v

    def l1_group(self, group: str) -> L1Summary:
        for s in self.l1:
            if s.group == group:
                return s
        raise KeyError(group)


class Timings(BaseModel):
    """Wall-clock seconds per stage; kept out of the report so reruns compare byte for byte."""

    build_training_set: float = 0.0
    train: float = 0.0
    predict: float = 0.0
    mcs: float = 0.0
    extra_predict: float = 0.0
    sensitivity: float = 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def speedup(self) -> float:
        gp = self.train + self.predict
        return self.mcs / gp if gp > 0 else math.inf
