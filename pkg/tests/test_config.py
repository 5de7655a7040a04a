"""
Tests for experiment config parsing, settings and logging setup
"""
import json
import logging
from pathlib import Path

import pytest

from spectra_lab.core.config import AvSweepParams, load_config, parse_config
from spectra_lab.core.exceptions import ConfigError
from spectra_lab.core.logging_config import configure_logging
from spectra_lab.core.models import TaskName, canonical_json, content_hash, to_jsonable
from spectra_lab.core.settings import get_settings

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
task: spectrum
grid:
  lower: [-5.0]
  upper: [5.0]
  spacing: 0.05
"""


def test_minimal_config_fills_defaults():
    """Test defaults for every section"""
    config = parse_config(MINIMAL)
    assert config.task == TaskName.SPECTRUM
    assert config.seed == 0
    assert config.operator.potential.family == "zero"
    assert config.operator.klmn == "auto"
    assert config.spectrum.count == 10
    assert config.output.format == ["csv", "json"]
    assert config.grid.to_spec().nodes == (199,)


def test_task_from_command_line():
    """Test the command-line task fills a missing key and must agree with a present one"""
    text = MINIMAL.replace("task: spectrum\n", "")
    config = parse_config(text, task="av-sweep")
    assert config.task == TaskName.AV_SWEEP
    assert isinstance(config.params, AvSweepParams)
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL, task="probe")
    assert "task" in info.value.diagnostics[0]


def test_grid_needs_exactly_one_resolution():
    """Test nodes and spacing together"""
    text = MINIMAL + "  nodes: [100]\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert any(d.startswith("grid") and "exactly one" in d for d in info.value.diagnostics)


def test_unknown_keys_are_rejected():
    """Test extra keys anywhere fail validation with their location"""
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "spectrum:\n  cont: 5\n")
    assert any(d.startswith("spectrum.cont") for d in info.value.diagnostics)


def test_probe_needs_three_increasing_radii():
    """Test the radii validator"""
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "probe:\n  radii: [4.0, 8.0]\n")
    assert any("≥ 3 radii required" in d for d in info.value.diagnostics)
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "probe:\n  radii: [4.0, 8.0, 6.0]\n")


def test_yaml_errors_carry_line_numbers():
    """Test malformed YAML"""
    with pytest.raises(ConfigError) as info:
        parse_config("task: spectrum\ngrid: [1, 2\n")
    assert "line" in info.value.diagnostics[0]
    with pytest.raises(ConfigError):
        parse_config("- just\n- a list\n")


def test_potential_families_are_discriminated():
    """Test unknown families and family-specific fields"""
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "operator:\n  potential: {family: cubic}\n")
    config = parse_config(MINIMAL + "operator:\n  potential: {family: power, c: 2.0, alpha: 4.0}\n  klmn: [0.5, 1.0]\n")
    assert config.operator.potential.alpha == 4.0
    assert config.operator.klmn == (0.5, 1.0)


def test_kinetic_functions():
    """Test fractional and relativistic kinetic maps"""
    config = parse_config(MINIMAL + "operator:\n  kinetic: {kind: relativistic, mass: 1.0}\n")
    g = config.operator.kinetic.function()
    assert g(3.0) == pytest.approx(1.0)
    config = parse_config(MINIMAL + "operator:\n  kinetic: {kind: fractional, s: 0.5}\n")
    assert config.operator.kinetic.function()(4.0) == pytest.approx(2.0)


def test_digest_tracks_content():
    """Test equal configs hash equally and the seed changes the hash"""
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL)
    c = parse_config(MINIMAL + "seed: 5\n")
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert len(a.digest()) == 64


def test_load_config_missing_file(tmp_path):
    """Test unreadable files become config errors"""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    """Test every example config parses"""
    config = load_config(path)
    assert config.task in set(TaskName)


def test_jsonable_values():
    """Test non-finite floats, numpy values and enums"""
    import numpy as np

    value = {"a": np.float64(np.inf), "b": [np.int64(3), -np.inf, float("nan")], "c": TaskName.PROBE}
    assert to_jsonable(value) == {"a": "inf", "b": [3, "-inf", "nan"], "c": "probe"}
    assert json.loads(canonical_json({"b": 1, "a": 2})) == {"a": 2, "b": 1}
    assert content_hash({"b": 1, "a": 2}) == content_hash({"a": 2, "b": 1})


def test_settings_from_environment(monkeypatch):
    """Test the SPECTRA_LAB_ prefix"""
    monkeypatch.setenv("SPECTRA_LAB_DENSE_BUDGET", "123")
    get_settings.cache_clear()
    assert get_settings().dense_budget == 123


def test_settings_from_dotenv(tmp_path):
    """Test a .env file in the working directory"""
    (tmp_path / ".env").write_text("SPECTRA_LAB_WORKERS=4\n")
    get_settings.cache_clear()
    assert get_settings().workers == 4


def test_json_logging(capsys):
    """Test the JSON formatter emits one object per record"""
    configure_logging("INFO", json_output=True)
    logging.getLogger("spectra_lab.test").info("hello")
    line = capsys.readouterr().err.strip().splitlines()[-1]
    record = json.loads(line)
    assert record["message"] == "hello"
    assert record["levelname"] == "INFO"
