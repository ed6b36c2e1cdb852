import json

import pytest
from typer.testing import CliRunner

from enclosure_lab.asymptotics import T0, leading_series
from enclosure_lab.cli import EXIT_FAILURE, EXIT_VALIDATION, app
from enclosure_lab.reconstruct import series_to_csv
from enclosure_lab.stationary import find_pairs


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(app, ["--log-level", "WARNING", *args])


def test_validate_accepts_a_scene_file(runner, tmp_path, cfg1_document):
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(cfg1_document))
    result = _invoke(runner, "validate", str(path))
    assert result.exit_code == 0
    assert '"valid": true' in result.output


def test_validate_reports_diagnostics(runner, tmp_path, cfg1_document):
    cfg1_document["cavities"][0]["kind"] = "neumann_minus"
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(cfg1_document))
    result = _invoke(runner, "validate", str(path))
    assert result.exit_code == EXIT_VALIDATION
    assert "λ₁ margin (n₋) violated" in result.output


def test_unknown_example_is_a_validation_error(runner, tmp_path):
    result = _invoke(runner, "asympt", "--example", "cfg9", "--output-dir", str(tmp_path))
    assert result.exit_code == EXIT_VALIDATION


def test_scene_and_example_together_fail(runner, tmp_path):
    result = _invoke(
        runner,
        "stationary",
        "--scene",
        "x.json",
        "--example",
        "cfg1",
        "--output-dir",
        str(tmp_path),
    )
    assert result.exit_code == EXIT_FAILURE


def test_asympt_classifies(runner, tmp_path):
    result = _invoke(
        runner, "asympt", "--example", "cfg1", "--T", "5", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0
    report = json.loads((tmp_path / "asympt.json").read_text())
    assert report["T0"] == pytest.approx(-1.0 / 24.0)
    assert report["classification"] == "minus_infinity"


def test_stationary_writes_pairs(runner, tmp_path):
    result = _invoke(
        runner, "stationary", "--example", "cfg1-symmetric", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0
    report = json.loads((tmp_path / "stationary.json").read_text())
    assert report["regime"] == "equal"
    assert [pair["cavity_id"] for pair in report["pairs"]] == ["d1", "n1"]
    assert all(pair["nondegenerate"] for pair in report["pairs"])


def test_bad_tau_grid_is_a_usage_error(runner, tmp_path):
    result = _invoke(runner, "forward", "--tau-grid", "8,oops", "--output-dir", str(tmp_path))
    assert result.exit_code == 2
    assert "--tau-grid" in result.output


def test_forward_prints_csv(runner, tmp_path):
    result = _invoke(
        runner, "forward", "--example", "cfg1", "--tau-grid", "8,12", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0
    assert "tau,sign,log_mag" in result.output
    assert (tmp_path / "forward.csv").exists()


def test_reconstruct_from_csv(runner, tmp_path, cfg1):
    series = leading_series(T0(cfg1, find_pairs(cfg1)), [10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0])
    path = tmp_path / "series.csv"
    path.write_text(series_to_csv(series))
    result = _invoke(
        runner, "reconstruct", "--input", str(path), "--T", "5", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0
    report = json.loads((tmp_path / "reconstruct.json").read_text())
    assert report["l0_hat"] == pytest.approx(2.0, abs=1e-6)
    assert report["sign_class"] == "minus"
    assert report["classification"] == "minus_infinity"
    assert report["source"] == "external"


def test_reconstruct_classifies_a_sign_flipping_series(runner, tmp_path):
    taus = [10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
    rows = [f"{tau!r},{(-1) ** k},{-4.0 * tau!r}" for k, tau in enumerate(taus)]
    path = tmp_path / "series.csv"
    path.write_text("tau,sign,log_mag\n" + "\n".join(rows) + "\n")
    result = _invoke(
        runner, "reconstruct", "--input", str(path), "--T", "5", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0
    report = json.loads((tmp_path / "reconstruct.json").read_text())
    assert report["classification"] == "indeterminate"
    assert report["l0_hat"] is None
    assert "mixed or zero signs" in report["fit_error"]


def test_reconstruct_without_T_still_rejects_mixed_signs(runner, tmp_path):
    taus = [10.0, 15.0, 20.0, 25.0]
    rows = [f"{tau!r},{(-1) ** k},{-4.0 * tau!r}" for k, tau in enumerate(taus)]
    path = tmp_path / "series.csv"
    path.write_text("tau,sign,log_mag\n" + "\n".join(rows) + "\n")
    result = _invoke(runner, "reconstruct", "--input", str(path), "--output-dir", str(tmp_path))
    assert result.exit_code == EXIT_FAILURE
