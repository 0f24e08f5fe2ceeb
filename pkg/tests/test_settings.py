import pytest
from pydantic import ValidationError

from equiv_guard.models import ALL_SMELLS, AnalysisMode, Smell
from equiv_guard.settings import ENV_EXPLORER_KEY, ENV_SOLVER, load_settings


def test_defaults_come_from_yaml(tmp_path):
    settings = load_settings()

    assert settings.mode == AnalysisMode.FULL
    assert settings.detectors == list(ALL_SMELLS)
    assert settings.timeout_s == 60
    assert settings.solver_timeout_s == 5
    assert settings.unroll == 2
    assert settings.tdt_interval_threshold == 256
    assert settings.bhm_height_threshold == 1_000_000
    assert settings.optimizer is False
    # conftest points the cache at the test's tmp dir
    assert settings.cache_dir == tmp_path / "cache"


def test_environment_overrides_file(monkeypatch):
    monkeypatch.setenv(ENV_EXPLORER_KEY, "KEY123")
    monkeypatch.setenv(ENV_SOLVER, "/usr/bin/cvc5")

    settings = load_settings()

    assert settings.explorer_key == "KEY123"
    assert settings.solver_path == "/usr/bin/cvc5"
    assert "KEY123" not in repr(settings)


def test_explicit_overrides_win_and_none_falls_through():
    settings = load_settings(mode="neither", detectors="ccra, Fgr", unroll=None)

    assert settings.mode == AnalysisMode.NEITHER
    assert settings.detectors == [Smell.CCRA, Smell.FGR]
    assert settings.unroll == 2


def test_unknown_detector_is_rejected():
    with pytest.raises(ValueError, match="unknown smell 'xyz'"):
        load_settings(detectors="ccra,xyz")


def test_non_positive_timeout_is_rejected():
    with pytest.raises(ValidationError):
        load_settings(timeout_s=0)


def test_settings_are_frozen():
    settings = load_settings()
    with pytest.raises(ValidationError):
        settings.unroll = 5


@pytest.mark.parametrize("mode, symbolic, sanitizers", [
    (AnalysisMode.FULL, True, True),
    (AnalysisMode.STATIC_ONLY, False, True),
    (AnalysisMode.NO_GUIDANCE, True, False),
    (AnalysisMode.NEITHER, False, False),
])
def test_mode_switches(mode, symbolic, sanitizers):
    assert mode.symbolic is symbolic
    assert mode.sanitizers is sanitizers
