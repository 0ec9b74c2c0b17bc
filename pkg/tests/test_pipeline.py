import json
from pathlib import Path

import numpy as np
import pytest

from gpopf.acopf.inputs import apply_input
from gpopf.acopf.opf import ORACLE_CALLS, solve_opf
from gpopf.domain.errors import ConfigError, OracleInvokedError, SampleBudgetError
from gpopf.domain.models import ExperimentConfig, FitOptions, OracleConfig, SampleDistribution
from gpopf.gpr.model import predict
from gpopf.orchestrator.pipeline import build_scenario, predict_only, run_experiment
from gpopf.popf.surrogates import propagate, train_surrogates
from gpopf.popf.training_set import build_training_set, conventional_outputs, output_names
from gpopf.popf.uncertainty import build_uncertainty
from gpopf.store.artifacts import INCOMPLETE

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DC = OracleConfig(mode="dc_qp")


def _small_config(out: Path, **update) -> ExperimentConfig:
    cfg = ExperimentConfig(
        name="small",
        case="case14",
        renewable_buses=[7, 9, 14],
        penetration_target=10.0,
        n_train=30,
        n_test=40,
        oracle=DC,
        fit=FitOptions(restarts=2),
        extra_test_distributions=[SampleDistribution(kind="beta", alpha=2.0, beta=5.0)],
        seed=5,
        output_dir=out,
    )
    return cfg.model_copy(update=update)


def test_output_names_layout(case14_renewable):
    names = output_names(case14_renewable)
    assert names[0] == "cost"
    assert names[1] == "pg:g0@1"
    assert "pg:g5@7" in names
    assert names[-1] == "vm:14"
    assert len(names) == 1 + 2 * case14_renewable.n_gen + case14_renewable.n_bus
    assert conventional_outputs(case14_renewable) == [f"pg:g{k}@{b}" for k, b in enumerate([1, 2, 3, 6, 8])]


def test_single_sample_on_a_collapsed_box(case14_renewable):
    spec = build_uncertainty(case14_renewable, [7, 9, 14], 0.0, 0.0)
    ts = build_training_set(case14_renewable, spec, 1, SampleDistribution(), DC, seed=0)
    assert ts.n_samples == 1
    assert np.array_equal(ts.X[0], spec.x_base)

    direct = solve_opf(apply_input(case14_renewable, spec.x_base, [7, 9, 14]), DC)
    assert np.array_equal(ts.Y[0], direct.outputs())

    models = train_surrogates(ts, FitOptions(restarts=1), seed=0)
    assert all(m.constant for m in models)
    samples = propagate(models, spec, SampleDistribution(kind="point"), 3)
    assert np.array_equal(samples.Y, np.tile(direct.outputs(), (3, 1)))
    assert np.all(samples.variance == 0.0)


def test_training_rows_are_converged_solves(case14_renewable, spec14):
    ts = build_training_set(case14_renewable, spec14, 6, SampleDistribution(), DC, seed=2)
    assert ts.rejected == 0
    assert spec14.contains(ts.X)
    for x, y in zip(ts.X, ts.Y, strict=True):
        sol = solve_opf(apply_input(case14_renewable, x, spec14.renewable_buses, spec14.load_buses), DC)
        assert sol.converged
        assert y[0] == pytest.approx(sol.cost, rel=1e-12)
    frame = ts.frame()
    assert list(frame.columns[: spec14.n]) == spec14.labels()
    assert frame.shape == (6, spec14.n + len(ts.output_names))


def test_rejection_budget_exhausted(case14_renewable, spec14):
    starved = OracleConfig(mode="ac_ipm", max_iter=1)
    with pytest.raises(SampleBudgetError) as exc:
        build_training_set(case14_renewable, spec14, 5, SampleDistribution(), starved, seed=0)
    assert exc.value.allowed == 1


def test_run_experiment_writes_artifacts(tmp_path: Path):
    cfg = _small_config(tmp_path / "run")
    result = run_experiment(cfg)
    out = cfg.output_dir
    report = result.report

    assert not (out / INCOMPLETE).exists()
    for name in (
        "case.m", "report.json", "timings.json", "samples/train.csv", "samples/test_gp.csv",
        "samples/test_mcs.csv", "samples/extra_0_beta_2_5_renewable.csv", "models/manifest.json",
        "histograms/l1_pg.csv", "sensitivity.csv",
    ):
        assert (out / name).is_file(), name

    assert report.case == "case14"
    assert report.n_train == 30
    assert report.n_paired == 40
    assert report.penetration_pct == pytest.approx(10.0)
    assert report.gp.checksum == report.mcs.checksum
    assert report.cost_mean_error_pct < 1.0
    assert report.l1_group("pg").mean < 10.0
    # no reactive power in the DC model
    assert [s.group for s in report.l1] == ["pg", "vm"]
    assert report.sensitivity is not None
    assert len(report.sensitivity.records) == 5
    assert [d.label for d in report.extra_distributions] == ["beta_2_5_renewable"]

    saved = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert "speedup" not in saved
    assert "speedup" in json.loads((out / "timings.json").read_text(encoding="utf-8"))


def test_rerun_reproduces_report_bytes(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[])
    run_experiment(cfg)
    first = (cfg.output_dir / "report.json").read_bytes()
    run_experiment(cfg)
    assert (cfg.output_dir / "report.json").read_bytes() == first


def test_predict_only_matches_the_run_without_solving(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[])
    result = run_experiment(cfg)
    assert result.report.n_dropped == 0

    before = ORACLE_CALLS.value
    pred = predict_only(cfg.output_dir / "models", output_dir=tmp_path / "pred")
    assert ORACLE_CALLS.value == before
    assert pred.oracle_calls == 0
    assert pred.summary == result.report.gp
    assert (tmp_path / "pred" / "predict_uniform_iid.json").is_file()

    # a reloaded surrogate predicts what the trained one did
    x = pred.samples.X[0]
    assert predict(pred.models[0], x).mean == predict(result.models[0], x).mean


def test_predict_only_other_distribution(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[])
    run_experiment(cfg)
    pred = predict_only(cfg.output_dir / "models", SampleDistribution(kind="truncated_normal"), n_test=15, seed=1)
    assert pred.summary.n_samples == 15
    assert pred.summary.label == "truncated_normal"


def test_predict_only_missing_directory(tmp_path: Path):
    with pytest.raises(ConfigError):
        predict_only(tmp_path / "nothing")
    (tmp_path / "empty").mkdir()
    with pytest.raises(ConfigError):
        predict_only(tmp_path / "empty")


def test_failed_run_is_marked_incomplete(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", n_train=5, oracle=OracleConfig(max_iter=1))
    with pytest.raises(SampleBudgetError) as exc:
        run_experiment(cfg)
    assert "stage: build_training_set" in exc.value.__notes__
    marker = (cfg.output_dir / INCOMPLETE).read_text(encoding="utf-8")
    assert marker.startswith("stage: build_training_set")
    assert not (cfg.output_dir / "report.json").exists()


def test_unknown_case_is_a_config_error(tmp_path: Path):
    with pytest.raises(ConfigError):
        build_scenario(_small_config(tmp_path, case=str(tmp_path / "missing.m")))


def test_bundled_configs_validate():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = ExperimentConfig.from_file(path)
        assert cfg.case in ("case14", "case30")
        assert cfg.output_dir.is_absolute()
        assert cfg.renewable_buses



def test_bundled_configs_fit_an_affine_trend():
    for path in sorted(CONFIGS.glob("*.json")):
        fit = ExperimentConfig.from_file(path).fit
        assert fit.mean == "linear"
        assert fit.restarts == 2


def test_run_routes_models_through_the_artifact_writer(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[])
    result = run_experiment(cfg)
    models_dir = (cfg.output_dir / "models").resolve()
    assert models_dir / "manifest.json" in result.artifacts
    records = [p for p in result.artifacts if p.parent == models_dir and p.name != "manifest.json"]
    assert len(records) == len(result.models)


def test_linear_mean_run_keeps_sensitivity_on_zero_mean_fits(tmp_path: Path):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[], fit=FitOptions(restarts=2, mean="linear"))
    report = run_experiment(cfg).report
    assert report.sensitivity is not None
    assert len(report.sensitivity.records) == 5
    assert all(r.gamma > 0 for r in report.sensitivity.records)


def test_predict_only_refuses_to_solve(tmp_path: Path, monkeypatch):
    cfg = _small_config(tmp_path / "run", extra_test_distributions=[])
    run_experiment(cfg)

    def solving_propagate(*args, **kwargs):
        ORACLE_CALLS.increment()
        return propagate(*args, **kwargs)

    monkeypatch.setattr("gpopf.orchestrator.pipeline.propagate", solving_propagate)
    with pytest.raises(OracleInvokedError) as exc:
        predict_only(cfg.output_dir / "models", n_test=5)
    assert exc.value.calls == 1


def test_wide_30_bus_training_set_stays_within_budget():
    cfg = ExperimentConfig.from_file(CONFIGS / "case30_load10.json")
    sc = build_scenario(cfg)
    ts = build_training_set(sc.case, sc.spec, 40, cfg.train_distribution, cfg.oracle, seed=cfg.seed)
    assert ts.n_samples == 40
    assert ts.rejected <= 8


def _strictly_decreasing_head(bins, k=3):
    counts = [b.count for b in bins[:k]]
    return all(a > b for a, b in zip(counts, counts[1:]))


@pytest.mark.slow
def test_case14_acceptance(tmp_path: Path):
    cfg = ExperimentConfig.from_file(CONFIGS / "case14_load10.json")
    cfg = cfg.model_copy(update={"extra_test_distributions": [], "output_dir": tmp_path / "case14"})
    result = run_experiment(cfg, jobs=-1)
    report = result.report
    assert report.rejected_training <= cfg.n_train // 5
    assert report.cost_mean_error_pct <= 0.01
    assert report.cost_std_error_pct <= 0.05
    assert report.l1_group("pg").mean <= 1.0
    assert report.l1_group("vm").mean <= 0.1
    assert _strictly_decreasing_head(report.l1_group("pg").histogram)
    assert _strictly_decreasing_head(report.l1_group("vm").histogram)
    assert result.timings.speedup >= 10


@pytest.mark.slow
@pytest.mark.parametrize("name", ["case30_load5", "case30_load10"])
def test_case30_inverse_sensitivity(name, tmp_path: Path):
    cfg = ExperimentConfig.from_file(CONFIGS / f"{name}.json")
    cfg = cfg.model_copy(update={"n_test": 2000, "output_dir": tmp_path / name})
    report = run_experiment(cfg, jobs=-1).report
    assert report.rejected_training <= cfg.n_train // 5
    assert report.sensitivity is not None
    assert report.sensitivity.rho < 0
