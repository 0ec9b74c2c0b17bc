from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from gpopf.domain.errors import SchemaVersionError
from gpopf.gpr.kernel import Hyperparameters, kernel_matrix
from gpopf.gpr.linalg import cholesky_with_jitter
from gpopf.gpr.model import GpModel, Scaler
from gpopf.popf.uncertainty import UncertaintySpec
from gpopf.store.artifacts import ArtifactWriter

logger = logging.getLogger(__name__)


def _hex(a: np.ndarray | float) -> list[str] | str:
    if np.isscalar(a):
        return float(a).hex()
    return [float(v).hex() for v in np.asarray(a, dtype=float).ravel()]


def _unhex(values: list[str], shape: tuple[int, ...] | None = None) -> np.ndarray:
    a = np.array([float.fromhex(v) for v in values], dtype=float)
    return a.reshape(shape) if shape is not None else a


class ModelRecord(BaseModel):
    """One fitted GP; every float is stored as a hex literal so reloading is bit-exact."""

    model_config = ConfigDict(extra="forbid")

    output_name: str
    n_train: int
    n_inputs: int
    l: str
    sigma_f: str
    sigma_n: str
    lml: str
    jitter: str
    constant: bool
    x_train: list[str]
    y_train: list[str]
    alpha: list[str]
    x_mean: list[str]
    x_scale: list[str]
    y_mean: str
    y_scale: str
    trend: Optional[list[str]] = None

    @classmethod
    def from_model(cls, m: GpModel) -> ModelRecord:
        return cls(
            output_name=m.output_name,
            n_train=m.n_train,
            n_inputs=m.n_inputs,
            l=_hex(m.hp.l),
            sigma_f=_hex(m.hp.sigma_f),
            sigma_n=_hex(m.hp.sigma_n),
            lml=_hex(m.lml),
            jitter=_hex(m.jitter),
            constant=m.constant,
            x_train=_hex(m.x_train),
            y_train=_hex(m.y_train),
            alpha=_hex(m.alpha),
            x_mean=_hex(m.x_scaler.mean),
            x_scale=_hex(m.x_scaler.scale),
            y_mean=_hex(float(m.y_scaler.mean[0])),
            y_scale=_hex(float(m.y_scaler.scale[0])),
            trend=_hex(m.trend) if m.trend is not None else None,
        )

    def to_model(self) -> GpModel:
        hp = Hyperparameters(
            l=float.fromhex(self.l), sigma_f=float.fromhex(self.sigma_f), sigma_n=float.fromhex(self.sigma_n)
        )
        xs = _unhex(self.x_train, (self.n_train, self.n_inputs))
        jitter = float.fromhex(self.jitter)
        K = kernel_matrix(xs, xs, hp) + hp.sigma_n**2 * np.eye(self.n_train)
        return GpModel(
            hp=hp,
            x_train=xs,
            y_train=_unhex(self.y_train),
            alpha=_unhex(self.alpha),
            chol=cholesky_with_jitter(K, jitter),
            x_scaler=Scaler(mean=_unhex(self.x_mean), scale=_unhex(self.x_scale)),
            y_scaler=Scaler(mean=np.array([float.fromhex(self.y_mean)]), scale=np.array([float.fromhex(self.y_scale)])),
            lml=float.fromhex(self.lml),
            jitter=jitter,
            constant=self.constant,
            output_name=self.output_name,
            trend=_unhex(self.trend) if self.trend is not None else None,
        )


class UncertaintyRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    renewable_buses: list[int]
    load_buses: list[int]
    x_base: list[str]
    x_lower: list[str]
    x_upper: list[str]
    load_fraction: float
    renewable_fraction: float

    @classmethod
    def from_spec(cls, spec: UncertaintySpec) -> UncertaintyRecord:
        return cls(
            renewable_buses=list(spec.renewable_buses),
            load_buses=list(spec.load_buses),
            x_base=_hex(spec.x_base),
            x_lower=_hex(spec.x_lower),
            x_upper=_hex(spec.x_upper),
            load_fraction=spec.load_fraction,
            renewable_fraction=spec.renewable_fraction,
        )

    def to_spec(self) -> UncertaintySpec:
        return UncertaintySpec(
            renewable_buses=tuple(self.renewable_buses),
            load_buses=tuple(self.load_buses),
            x_base=_unhex(self.x_base),
            x_lower=_unhex(self.x_lower),
            x_upper=_unhex(self.x_upper),
            load_fraction=self.load_fraction,
            renewable_fraction=self.renewable_fraction,
        )


class Manifest(BaseModel):
    schema_version: str
    case: str
    output_names: list[str]
    uncertainty: UncertaintyRecord
    config: dict[str, Any]


@dataclass(frozen=True, eq=False)
class StoredModels:
    models: list[GpModel]
    spec: UncertaintySpec
    manifest: Manifest


class ModelStore:
    """Directory of fitted surrogates: manifest.json plus one JSON record per output."""

    SCHEMA_VERSION = "1.1"
    MANIFEST = "manifest.json"

    def __init__(self, root: Path):
        self.root = Path(root)

    @staticmethod
    def dir_for_run(output_dir: Path) -> Path:
        return Path(output_dir) / "models"

    def _record_path(self, index: int) -> Path:
        return self.root / f"model_{index:04d}.json"

    @staticmethod
    def _write(path: Path, text: str, writer: Optional[ArtifactWriter]) -> Path:
        if writer is None:
            path.write_text(text, encoding="utf-8")
            return path
        return writer.text(path.resolve().relative_to(writer.output_dir.resolve()).as_posix(), text)

    def save(
        self,
        models: Sequence[GpModel],
        spec: UncertaintySpec,
        case_name: str,
        config: dict[str, Any] | None = None,
        writer: Optional[ArtifactWriter] = None,
    ) -> Path:
        """Write one record per model and the manifest; with `writer`, through it so they are recorded."""
        self.root.mkdir(parents=True, exist_ok=True)
        for stale in self.root.glob("model_*.json"):
            stale.unlink()
        for i, m in enumerate(models):
            self._write(self._record_path(i), ModelRecord.from_model(m).model_dump_json(), writer)
        manifest = Manifest(
            schema_version=self.SCHEMA_VERSION,
            case=case_name,
            output_names=[m.output_name for m in models],
            uncertainty=UncertaintyRecord.from_spec(spec),
            config=config or {},
        )
        path = self._write(self.root / self.MANIFEST, manifest.model_dump_json(indent=2), writer)
        logger.info("saved %d models to %s", len(models), self.root)
        return path

    def load(self) -> StoredModels:
        path = self.root / self.MANIFEST
        if not path.is_file():
            raise FileNotFoundError(f"no model manifest in {self.root}")
        try:
            manifest = Manifest.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise SchemaVersionError(f"{path} is not a readable model manifest: {exc.error_count()} errors") from None
        if manifest.schema_version != self.SCHEMA_VERSION:
            raise SchemaVersionError(
                f"models in {self.root} use schema {manifest.schema_version}, expected {self.SCHEMA_VERSION}"
            )

        models = []
        for i, name in enumerate(manifest.output_names):
            rec_path = self._record_path(i)
            if not rec_path.is_file():
                raise FileNotFoundError(f"missing model record {rec_path.name} for {name}")
            try:
                rec = ModelRecord.model_validate_json(rec_path.read_text(encoding="utf-8"))
            except ValidationError as exc:
                raise SchemaVersionError(f"{rec_path.name}: {exc.error_count()} schema errors") from None
            if rec.output_name != name:
                raise SchemaVersionError(f"{rec_path.name} holds {rec.output_name}, manifest expects {name}")
            models.append(rec.to_model())
        return StoredModels(models=models, spec=manifest.uncertainty.to_spec(), manifest=manifest)
