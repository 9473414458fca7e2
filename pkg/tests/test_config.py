"""Tests for configuration loading."""

import os
from pathlib import Path
from unittest.mock import patch

import pytest

from jetcartan.config import Config

BASE_INI = """\
[verify]
tolerance = 1e-9
trials = 12
seed = 5
third_derivative_tolerance = 1e-7
finite_difference_tolerance = 1e-4
finite_difference_step = 1e-5
orientation = -1
jet_box = -2,2

[oracles]
fixture_directory = {oracles}
maintenance_mode = false

[logging]
log_level = warning
log_to_file = false
log_file = logs/jetcartan.log
"""

ENV_KEYS = ("JETCARTAN_LOG_LEVEL", "JETCARTAN_SEED", "JETCARTAN_ORACLE_MAINTENANCE")


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in ENV_KEYS:
        monkeypatch.delenv(key, raising=False)


@pytest.fixture
def write_config(tmp_path):
    def write(**replacements):
        text = BASE_INI.format(oracles=tmp_path / "oracles")
        for key, value in replacements.items():
            head, _, rest = text.partition(f"{key} = ")
            text = head + f"{key} = {value}\n" + rest.split("\n", 1)[1]
        path = tmp_path / "config.ini"
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


@pytest.fixture
def env_path(tmp_path):
    return str(tmp_path / "missing.env")


class TestLoading:
    """Tests for reading config.ini."""

    def test_values(self, write_config, env_path, tmp_path):
        config = Config(write_config(), env_path)
        assert config.tolerance == 1e-9
        assert config.trials == 12
        assert config.seed == 5
        assert config.orientation == -1
        assert config.jet_box == (-2.0, 2.0)
        assert config.log_level == "WARNING"
        assert config.get_oracle_directory_path() == tmp_path / "oracles"

    def test_missing_file(self, tmp_path, env_path):
        with pytest.raises(FileNotFoundError):
            Config(str(tmp_path / "nowhere.ini"), env_path)

    def test_project_config_loads(self, env_path):
        config = Config(env_path=env_path)
        assert config.get_oracle_directory_path() == Path(config.project_root) / "fixtures" / "oracles"

    def test_relative_oracle_directory(self, write_config, env_path):
        config = Config(write_config(fixture_directory="fixtures/oracles"), env_path)
        assert config.get_oracle_directory_path() == config.project_root / "fixtures" / "oracles"


class TestEnvironmentOverrides:
    def test_overrides_win(self, write_config, env_path):
        overrides = {"JETCARTAN_LOG_LEVEL": "debug", "JETCARTAN_SEED": "99", "JETCARTAN_ORACLE_MAINTENANCE": "yes"}
        with patch.dict(os.environ, overrides):
            config = Config(write_config(), env_path)
        assert config.log_level == "DEBUG"
        assert config.seed == 99
        assert config.oracle_maintenance_mode is True

    def test_bad_seed_is_ignored(self, write_config, env_path):
        with patch.dict(os.environ, {"JETCARTAN_SEED": "many"}):
            config = Config(write_config(), env_path)
        assert config.seed == 5

    def test_env_file(self, write_config, tmp_path):
        env_file = tmp_path / ".env"
        env_file.write_text("JETCARTAN_SEED=31\n", encoding="utf-8")
        with patch.dict(os.environ, {}):
            config = Config(write_config(), str(env_file))
        assert config.seed == 31


class TestValidation:
    """Tests for _validate_config."""

    def test_bad_tolerance(self, write_config, env_path):
        with pytest.raises(ValueError):
            Config(write_config(tolerance="0"), env_path)

    def test_bad_orientation(self, write_config, env_path):
        with pytest.raises(ValueError):
            Config(write_config(orientation="2"), env_path)

    def test_bad_jet_box(self, write_config, env_path):
        with pytest.raises(ValueError):
            Config(write_config(jet_box="1,-1"), env_path)

    def test_trials_fall_back(self, write_config, env_path):
        assert Config(write_config(trials="0"), env_path).trials == 20

    def test_third_tolerance_is_raised(self, write_config, env_path):
        config = Config(write_config(third_derivative_tolerance="1e-12"), env_path)
        assert config.third_derivative_tolerance == config.tolerance

    def test_unknown_log_level(self, write_config, env_path):
        assert Config(write_config(log_level="chatty"), env_path).log_level == "INFO"


class TestCheckSettings:
    def test_defaults(self, write_config, env_path, tmp_path):
        settings = Config(write_config(), env_path).check_settings()
        assert settings.tolerance == 1e-9
        assert settings.trials == 12
        assert settings.orientation == -1
        assert settings.oracle_directory == tmp_path / "oracles"

    def test_explicit_arguments_win(self, write_config, env_path):
        settings = Config(write_config(), env_path).check_settings(tolerance=1e-6, trials=3, orientation=1)
        assert settings.tolerance == 1e-6
        assert settings.trials == 3
        assert settings.orientation == 1
        assert settings.third_derivative_tolerance == 1e-6

    def test_str(self, write_config, env_path):
        text = str(Config(write_config(), env_path))
        assert "trials: 12" in text
        assert "orientation: -1" in text
        assert "jet_box: -2,2" in text
