"""
Shared pytest fixtures
Precision contexts, isolated settings and scratch output directories

Purpose: Every test builds its numbers from its own PrecisionContext and never
sees RRLAB_* variables from the developer's shell.
"""

import pytest

from config.settings import reset_settings
from services.bigarith import PrecisionContext


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    """Drop RRLAB_* overrides and the cached Settings instance around each test"""
    for name in ("RRLAB_PRECISION_BITS", "RRLAB_GUARD_BITS", "RRLAB_SEED", "RRLAB_OUTPUT_DIR",
                 "RRLAB_THREADS", "RRLAB_MAX_INTEGER_BITS", "RRLAB_GOLDEN_POWER_CAP"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def ctx():
    """Default 256-bit context"""
    return PrecisionContext(bits=256, guard_bits=32)


@pytest.fixture
def ctx512():
    return PrecisionContext(bits=512, guard_bits=32)


@pytest.fixture
def output_dir(tmp_path):
    directory = tmp_path / "rrlab_output"
    directory.mkdir()
    return directory
