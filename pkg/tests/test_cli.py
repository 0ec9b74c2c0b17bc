import json
from pathlib import Path

from typer.testing import CliRunner

from gpopf.cli import app

from conftest import TWO_BUS

runner = CliRunner()


def _write_config(tmp_path: Path, **extra) -> Path:
    cfg = {
        "name": "cli",
        "case": "case14",
        "renewable_buses": [7, 9, 14],
        "n_train": 20,
        "n_test": 20,
        "oracle": {"mode": "dc_qp"},
        "fit": {"restarts": 1},
        "output_dir": "out",
        **extra,
    }
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


def test_validate_bundled_case_with_power_flow():
    result = runner.invoke(app, ["validate-case", "case14", "--power-flow"])
    assert result.exit_code == 0, result.output
    assert "case14" in result.output
    assert "Power flow converged" in result.output


def test_validate_case_file(tmp_path: Path):
    p = tmp_path / "two_bus.m"
    p.write_text(TWO_BUS, encoding="utf-8")
    result = runner.invoke(app, ["validate-case", str(p)])
    assert result.exit_code == 0, result.output
    assert "Buses: 2" in result.output


def test_validate_case_reports_syntax_errors(tmp_path: Path):
    p = tmp_path / "broken.m"
    p.write_text(TWO_BUS.replace("2   1   50  0", "2   1   5x  0"), encoding="utf-8")
    result = runner.invoke(app, ["validate-case", str(p)])
    assert result.exit_code == 1
    assert "line 7" in result.output


def test_validate_missing_case_file(tmp_path: Path):
    result = runner.invoke(app, ["validate-case", str(tmp_path / "none.m")])
    assert result.exit_code == 2


def test_solve_opf_dc():
    result = runner.invoke(app, ["solve-opf", "case14", "--mode", "dc_qp"])
    assert result.exit_code == 0, result.output
    assert "converged" in result.output


def test_solve_opf_iteration_cap_exits_nonzero():
    result = runner.invoke(app, ["solve-opf", "case14", "--max-iter", "1"])
    assert result.exit_code == 1


def test_solve_opf_rejects_unknown_mode():
    result = runner.invoke(app, ["solve-opf", "case14", "--mode", "simplex"])
    assert result.exit_code == 2


def test_run_rejects_invalid_config(tmp_path: Path):
    result = runner.invoke(app, ["run", "--config", str(_write_config(tmp_path, n_train=0))])
    assert result.exit_code == 2
    result = runner.invoke(app, ["run", "--config", str(tmp_path / "missing.json")])
    assert result.exit_code == 2


def test_run_then_predict(tmp_path: Path):
    config = _write_config(tmp_path)
    result = runner.invoke(app, ["run", "-c", str(config)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "report.json").is_file()

    result = runner.invoke(
        app, ["predict", str(tmp_path / "out" / "models"), "--kind", "point", "--n-test", "5",
              "--out", str(tmp_path / "pred")]
    )
    assert result.exit_code == 0, result.output
    assert "0 OPF solves" in result.output
    assert (tmp_path / "pred" / "predict_point.json").is_file()


def test_predict_missing_models(tmp_path: Path):
    result = runner.invoke(app, ["predict", str(tmp_path / "nowhere")])
    assert result.exit_code == 1
    assert "model directory not found" in result.output
