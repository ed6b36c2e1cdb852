from pathlib import Path

import pytest

from enclosure_lab.config import DEFAULT_TAU_GRID, load_settings, parse_tau_grid


def test_parse_tau_grid():
    assert parse_tau_grid("8, 16,32") == (8.0, 16.0, 32.0)
    assert parse_tau_grid("8,16,") == (8.0, 16.0)
    with pytest.raises(ValueError, match="Malformed"):
        parse_tau_grid("8,x")
    with pytest.raises(ValueError, match="positive"):
        parse_tau_grid("8,-1")


def test_defaults(monkeypatch):
    for name in ("TAU_GRID", "OUTPUT_DIR", "LOG_LEVEL", "GRID_LEVEL", "N_MAX"):
        monkeypatch.delenv(f"ENCLOSURE_LAB_{name}", raising=False)
    settings = load_settings()
    assert settings.tau_grid == DEFAULT_TAU_GRID
    assert settings.output_dir == Path("results")
    assert settings.log_level == "INFO"
    assert settings.grid_level == 1
    assert settings.n_max is None


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("ENCLOSURE_LAB_TAU_GRID", "10,20,30,40")
    monkeypatch.setenv("ENCLOSURE_LAB_OUTPUT_DIR", "out")
    monkeypatch.setenv("ENCLOSURE_LAB_LOG_LEVEL", "debug")
    monkeypatch.setenv("ENCLOSURE_LAB_GRID_LEVEL", "2")
    monkeypatch.setenv("ENCLOSURE_LAB_N_MAX", "60")
    settings = load_settings()
    assert settings.tau_grid == (10.0, 20.0, 30.0, 40.0)
    assert settings.output_dir == Path("out")
    assert settings.log_level == "DEBUG"
    assert (settings.grid_level, settings.n_max) == (2, 60)


@pytest.mark.parametrize(
    ("name", "value"),
    [
        ("ENCLOSURE_LAB_GRID_LEVEL", "two"),
        ("ENCLOSURE_LAB_N_MAX", "0"),
        ("ENCLOSURE_LAB_TAU_GRID", "a,b"),
    ],
)
def test_bad_environment_values(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValueError, match=name):
        load_settings()
