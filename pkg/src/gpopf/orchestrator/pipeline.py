from __future__ import annotations

import logging
import subprocess
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from gpopf import __version__
from gpopf.acopf.opf import ORACLE_CALLS
from gpopf.caseio.model import NetworkCase, add_renewables, penetration, renewable_capacities
from gpopf.caseio.parser import load_case
from gpopf.caseio.writer import format_case
from gpopf.domain.errors import ConfigError, GpopfError, OracleInvokedError
from gpopf.domain.models import ExperimentConfig, SampleDistribution
from gpopf.gpr.model import GpModel, bound_hits
from gpopf.popf.mcs import mcs_reference
from gpopf.popf.metrics import compare, histogram, paired_l1
from gpopf.popf.report import DistributionSummary, PopfReport, Timings
from gpopf.popf.samples import SampleSet, summarize
from gpopf.popf.sampling import SeedLike, child_seeds
from gpopf.popf.surrogates import propagate, train_surrogates
from gpopf.popf.training_set import TrainingSet, build_training_set, conventional_outputs
from gpopf.popf.uncertainty import UncertaintySpec, build_uncertainty
from gpopf.sensitivity.subspace import inverse_relation_report, sensitivity_records, to_summary
from gpopf.store.artifacts import ArtifactWriter
from gpopf.store.model_store import ModelStore

logger = logging.getLogger(__name__)

# children of the config seed, by purpose
_TRAIN, _TEST, _FIT, _EXTRA = range(4)


@dataclass(frozen=True, eq=False)
class Scenario:
    case: NetworkCase
    spec: UncertaintySpec
    penetration_pct: float


@dataclass(eq=False)
class ExperimentResult:
    report: PopfReport
    timings: Timings
    training_set: TrainingSet
    models: list[GpModel]
    gp: SampleSet
    mcs: SampleSet
    output_dir: Path
    artifacts: list[Path] = field(default_factory=list)


@dataclass(eq=False)
class PredictResult:
    summary: DistributionSummary
    samples: SampleSet
    models: list[GpModel]
    oracle_calls: int = 0


def _best_effort_build_id() -> str:
    src = Path(__file__).resolve().parent
    try:
        out = subprocess.check_output(
            ["git", "-C", str(src), "describe", "--always", "--dirty", "--tags"],
            stderr=subprocess.DEVNULL,
            text=True,
        ).strip()
        return f"gpopf {__version__} ({out})" if out else f"gpopf {__version__}"
    except Exception:
        return f"gpopf {__version__}"


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    """Base case with the configured renewable units attached, and its uncertainty box."""
    try:
        case = load_case(cfg.case)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.renewable_buses:
        caps = cfg.renewable_capacities
        if caps is None:
            caps = renewable_capacities(case, len(cfg.renewable_buses), cfg.penetration_target or 0.0)
        case = add_renewables(case, cfg.renewable_buses, caps)
    spec = build_uncertainty(case, cfg.renewable_buses, cfg.load_fraction, cfg.renewable_fraction)
    pct = penetration(case)
    logger.info(
        "%s: %d buses, %d generators, %d uncertain inputs, renewable penetration %.2f%%",
        case.name, case.n_bus, case.n_gen, spec.n, pct,
    )
    return Scenario(case=case, spec=spec, penetration_pct=pct)


class _Stages:
    """Wall-clock per stage, and the name of the stage currently running."""

    def __init__(self) -> None:
        self.current = "setup"
        self.seconds: dict[str, float] = {}

    @contextmanager
    def run(self, name: str) -> Iterator[None]:
        self.current = name
        t0 = time.perf_counter()
        yield
        self.seconds[name] = time.perf_counter() - t0
        logger.info("stage %s finished in %.2f s", name, self.seconds[name])


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Training set, surrogates, GP propagation, paired MCS, comparison and sensitivity, with artifacts."""
    writer = ArtifactWriter(cfg.output_dir)
    writer.start("setup")
    stages = _Stages()
    try:
        return _run(cfg, jobs, writer, stages)
    except GpopfError as exc:
        exc.add_note(f"stage: {stages.current}")
        writer.mark_incomplete(stages.current, str(exc))
        raise


def _run(cfg: ExperimentConfig, jobs: int, writer: ArtifactWriter, stages: _Stages) -> ExperimentResult:
    seeds = child_seeds(cfg.seed, 4)

    with stages.run("setup"):
        sc = build_scenario(cfg)
        writer.text("case.m", format_case(sc.case))

    with stages.run("build_training_set"):
        ts = build_training_set(
            sc.case, sc.spec, cfg.n_train, cfg.train_distribution, cfg.oracle, seed=seeds[_TRAIN], jobs=jobs
        )
        writer.csv("samples/train.csv", ts.frame())

    with stages.run("train"):
        models = train_surrogates(ts, cfg.fit, seed=seeds[_FIT], jobs=jobs)
        ModelStore(ModelStore.dir_for_run(cfg.output_dir)).save(
            models, sc.spec, sc.case.name, cfg.model_dump(mode="json"), writer=writer
        )

    with stages.run("predict"):
        gp = propagate(models, sc.spec, cfg.test_distribution, cfg.n_test, seed=seeds[_TEST])

    with stages.run("mcs"):
        mcs = mcs_reference(sc.case, sc.spec, cfg.test_distribution, cfg.n_test, cfg.oracle,
                            seed=seeds[_TEST], jobs=jobs)

    with stages.run("compare"):
        report = compare(gp, mcs, cfg.histogram_bins)
        labels = sc.spec.labels()
        writer.csv("samples/test_gp.csv", gp.frame(labels))
        writer.csv("samples/test_mcs.csv", mcs.frame(labels))
        for s in report.l1:
            writer.csv(f"histograms/l1_{s.group}.csv", histogram(paired_l1(gp, mcs, s.group), cfg.histogram_bins))

    extras: list[DistributionSummary] = []
    with stages.run("extra_predict"):
        extra_seeds = child_seeds(seeds[_EXTRA], len(cfg.extra_test_distributions))
        for i, (dist, seed) in enumerate(zip(cfg.extra_test_distributions, extra_seeds, strict=True)):
            samples = propagate(models, sc.spec, dist, cfg.n_test, seed=seed)
            extras.append(summarize(samples))
            writer.csv(f"samples/extra_{i}_{dist.label()}.csv", samples.frame(labels))

    sensitivity = None
    with stages.run("sensitivity"):
        names = conventional_outputs(sc.case, cfg.sensitivity_outputs)
        if len(names) >= 3:
            sens_models = models
            if cfg.fit.mean != "zero":
                # gamma is read off zero-mean fits of the same training rows
                zero_mean = cfg.fit.model_copy(update={"mean": "zero"})
                sens_models = train_surrogates(ts.subset(names), zero_mean, seed=seeds[_FIT], jobs=jobs)
            relation = inverse_relation_report(sensitivity_records(sens_models, mcs, names))
            writer.csv("sensitivity.csv", relation.table)
            sensitivity = to_summary(relation, cfg.sensitivity_outputs)
        else:
            logger.warning("sensitivity skipped: %d conventional generators, need 3", len(names))

    report = report.model_copy(
        update={
            "experiment": cfg.name,
            "case": sc.case.name,
            "seed": cfg.seed,
            "build": _best_effort_build_id(),
            "penetration_pct": sc.penetration_pct,
            "n_train": ts.n_samples,
            "rejected_training": ts.rejected,
            "hyperparameter_bound_hits": {
                m.output_name: hits for m in models if (hits := bound_hits(m, cfg.fit))
            },
            "extra_distributions": extras,
            "sensitivity": sensitivity,
            "config": cfg.model_dump(mode="json"),
        }
    )
    timings = Timings(
        build_training_set=stages.seconds.get("build_training_set", 0.0),
        train=stages.seconds.get("train", 0.0),
        predict=stages.seconds.get("predict", 0.0),
        mcs=stages.seconds.get("mcs", 0.0),
        extra_predict=stages.seconds.get("extra_predict", 0.0),
        sensitivity=stages.seconds.get("sensitivity", 0.0),
    )
    writer.json("report.json", report)
    writer.json("timings.json", timings)
    writer.finish()
    logger.info(
        "cost mean error %.3g%%, std error %.3g%%, GP speedup %.1fx",
        report.cost_mean_error_pct, report.cost_std_error_pct, timings.speedup,
    )
    return ExperimentResult(
        report=report, timings=timings, training_set=ts, models=models, gp=gp, mcs=mcs,
        output_dir=cfg.output_dir, artifacts=list(writer.written),
    )


def evaluation_seed(seed: SeedLike) -> np.random.SeedSequence:
    """Seed of the test input stream for a given config seed."""
    return child_seeds(seed, 4)[_TEST]


def predict_only(
    model_dir: Path,
    test_distribution: Optional[SampleDistribution] = None,
    n_test: Optional[int] = None,
    seed: Optional[int] = None,
    output_dir: Optional[Path] = None,
) -> PredictResult:
    """Propagate a distribution through saved surrogates; the OPF oracle is never called.

    Defaults (distribution, sample count, seed) come from the config stored with the models.
    """
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise ConfigError(f"model directory not found: {model_dir}")
    try:
        stored = ModelStore(model_dir).load()
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None

    saved = stored.manifest.config
    if test_distribution is None:
        test_distribution = SampleDistribution.model_validate(saved.get("test_distribution", {}))
    n_test = n_test if n_test is not None else int(saved.get("n_test", 1000))
    seed = seed if seed is not None else int(saved.get("seed", 0))

    before = ORACLE_CALLS.value
    samples = propagate(stored.models, stored.spec, test_distribution, n_test, seed=evaluation_seed(seed))
    summary = summarize(samples)
    calls = ORACLE_CALLS.value - before
    if calls:
        raise OracleInvokedError(calls)

    if output_dir is not None:
        writer = ArtifactWriter(output_dir)
        writer.start("predict")
        writer.json(f"predict_{test_distribution.label()}.json", summary)
        writer.csv(f"samples/predict_{test_distribution.label()}.csv", samples.frame(stored.spec.labels()))
        writer.finish()
    return PredictResult(summary=summary, samples=samples, models=stored.models, oracle_calls=calls)
