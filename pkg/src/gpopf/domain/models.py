from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from gpopf.domain.errors import ConfigError

OracleMode = Literal["ac_ipm", "dc_qp"]
DistributionKind = Literal[
    "uniform_box", "truncated_normal", "beta", "empirical_file", "point"
]


class OracleConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(1e-8, gt=0)  # power balance, pu
    opt_tol: float = Field(1e-6, gt=0)  # gradient / complementarity / cost change
    max_iter: int = Field(150, ge=1)
    flat_start: bool = True
    mode: OracleMode = "ac_ipm"


class SampleDistribution(BaseModel):
    """Input distribution over the uncertainty box.

    uniform_box      stratified (lhs) or i.i.d. uniform inside the box
    truncated_normal centered on the box midpoint, std = std_fraction * width
    beta             Beta(alpha, beta) scaled onto the box, on renewables only or on all inputs
    empirical_file   rows of a CSV file with one column per input, resampled with replacement
    point            a single point (default: the base-case input)
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DistributionKind = "uniform_box"
    sampler: Literal["lhs", "iid"] = "lhs"
    std_fraction: float = Field(0.2, gt=0)
    alpha: float = Field(2.0, gt=0)
    beta: float = Field(5.0, gt=0)
    beta_on: Literal["renewable", "all"] = "renewable"
    path: Optional[Path] = None
    point: Optional[list[float]] = None
    seed: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _check_kind(self) -> SampleDistribution:
        if self.kind == "empirical_file" and self.path is None:
            raise ValueError("empirical_file distribution needs a 'path'")
        return self

    def label(self) -> str:
        if self.kind == "uniform_box":
            return f"uniform_{self.sampler}"
        if self.kind == "beta":
            return f"beta_{self.alpha:g}_{self.beta:g}_{self.beta_on}"
        return self.kind


class FitOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    restarts: int = Field(5, ge=1)
    # log-uniform restart ranges, standardized units
    l_init: tuple[float, float] = (0.1, 10.0)
    sigma_f_init: tuple[float, float] = (0.1, 10.0)
    sigma_n_init: tuple[float, float] = (1e-4, 1e-1)
    # optimizer box
    l_bounds: tuple[float, float] = (1e-2, 1e3)
    sigma_f_bounds: tuple[float, float] = (1e-3, 1e3)
    sigma_n_bounds: tuple[float, float] = (1e-6, 10.0)
    sigma_n_floor: float = Field(1e-6, gt=0)
    max_iter: int = Field(200, ge=1)
    # prior mean of the standardized target: zero, or a least-squares affine trend in the inputs
    mean: Literal["zero", "linear"] = "zero"
    # targets whose spread is below constant_rtol * max(1, |mean|) get a constant model
    constant_rtol: float = Field(1e-6, ge=0)
    jitter_start: float = Field(1e-10, gt=0)
    jitter_max: float = Field(1e-6, gt=0)

    @model_validator(mode="after")
    def _check_ranges(self) -> FitOptions:
        for name in ("l_init", "sigma_f_init", "sigma_n_init", "l_bounds", "sigma_f_bounds", "sigma_n_bounds"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        if self.jitter_start > self.jitter_max:
            raise ValueError("jitter_start must not exceed jitter_max")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    case: str = "case14"  # bundled name or path to a MATPOWER file
    renewable_buses: list[int] = Field(default_factory=list)
    renewable_capacities: Optional[list[float]] = None  # MW; overrides penetration_target
    penetration_target: Optional[float] = Field(10.0, ge=0)  # % of base-case load
    load_fraction: float = Field(0.1, ge=0, le=1)
    renewable_fraction: float = Field(1.0, ge=0, le=1)
    n_train: int = Field(300, ge=2)
    n_test: int = Field(10_000, ge=1)
    train_distribution: SampleDistribution = SampleDistribution(kind="uniform_box", sampler="lhs")
    test_distribution: SampleDistribution = SampleDistribution(kind="uniform_box", sampler="iid")
    extra_test_distributions: list[SampleDistribution] = Field(default_factory=list)
    seed: int = Field(0, ge=0)
    oracle: OracleConfig = OracleConfig()
    fit: FitOptions = FitOptions()
    sensitivity_outputs: Literal["pg", "qg"] = "pg"
    histogram_bins: int = Field(20, ge=1)
    output_dir: Path = Path("runs/experiment")

    @model_validator(mode="after")
    def _check_renewables(self) -> ExperimentConfig:
        if len(set(self.renewable_buses)) != len(self.renewable_buses):
            raise ValueError("renewable_buses contains duplicates")
        if self.renewable_capacities is not None and len(self.renewable_capacities) != len(self.renewable_buses):
            raise ValueError("renewable_capacities must have one entry per renewable bus")
        if self.renewable_buses and self.renewable_capacities is None and self.penetration_target is None:
            raise ValueError("set penetration_target or renewable_capacities for the renewable buses")
        return self

    @classmethod
    def from_file(cls, path: Path) -> ExperimentConfig:
        """Load and validate a JSON config; relative paths resolve against the file's directory."""
        from gpopf.caseio.parser import resolve_case_path

        path = Path(path).expanduser().resolve()
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = cls.model_validate_json(path.read_text(encoding="utf-8"))
        base = path.parent

        def _dist(d: SampleDistribution) -> SampleDistribution:
            if d.path is None or d.path.is_absolute():
                return d
            return d.model_copy(update={"path": (base / d.path).resolve()})

        out = cfg.output_dir if cfg.output_dir.is_absolute() else (base / cfg.output_dir).resolve()
        return cfg.model_copy(
            update={
                "case": str(resolve_case_path(cfg.case, base)),
                "output_dir": out,
                "train_distribution": _dist(cfg.train_distribution),
                "test_distribution": _dist(cfg.test_distribution),
                "extra_test_distributions": [_dist(d) for d in cfg.extra_test_distributions],
            }
        )
