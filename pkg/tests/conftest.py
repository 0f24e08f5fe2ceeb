import shutil

import pytest

from equiv_guard.detectors.models import Confidence, Finding
from equiv_guard.models import SourceRange
from equiv_guard.settings import ENV_CACHE_DIR, ENV_EXPLORER_KEY, ENV_SOLC, ENV_SOLVER, load_settings


def _solc_available() -> bool:
    if shutil.which("solc"):
        return True
    try:
        import solcx
        return bool(solcx.get_installed_solc_versions())
    except Exception:
        return False


def pytest_collection_modifyitems(config, items):
    if _solc_available():
        return
    skip = pytest.mark.skip(reason="no solc binary installed")
    for item in items:
        if "requires_solc" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Keep the developer's environment out of every test."""
    for name in (ENV_EXPLORER_KEY, ENV_SOLVER, ENV_SOLC):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv(ENV_CACHE_DIR, str(tmp_path / "cache"))


@pytest.fixture
def static_settings():
    return load_settings(mode="static-only", workers=1)


@pytest.fixture
def neither_settings():
    return load_settings(mode="neither", workers=1)


@pytest.fixture
def full_settings():
    return load_settings(mode="full", workers=1)


@pytest.fixture
def make_finding():
    """Factory for findings that did not come out of a detector run."""
    def make(smell, confidence=Confidence.STATIC, file="contracts/Fig4.sol", line=21, start=400, **extra):
        fields = dict(smell=smell, contract="Fig4", function="verifyEIP712",
                      primary_location=SourceRange(start=start, length=12, file_index=0), file=file, line=line,
                      column=9, confidence=confidence, message=f"{smell.value} here")
        fields.update(extra)
        return Finding(**fields)

    return make
