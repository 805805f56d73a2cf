import json
from pathlib import Path

import pytest

from vphnav.config import get_settings
from vphnav.models import VphParams


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Settings are cached per process; tests that touch the environment need a clean cache."""
    for key in ("LOG_LEVEL", "NAV_OUTPUT_DIR", "NAV_JOBS", "NAV_SCENARIO_DIR"):
        monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def vph_params() -> VphParams:
    return VphParams()


@pytest.fixture
def write_json(tmp_path):
    def _write(name: str, document) -> Path:
        path = tmp_path / name
        text = document if isinstance(document, str) else json.dumps(document, indent=2)
        path.write_text(text, encoding="utf-8")
        return path
    return _write
