import pytest

from codedfog.config import settings
from codedfog.main import configure_logging

TEST_SEED = 20240601


@pytest.fixture(autouse=True)
def quiet_logging():
    # rebinds stderr, which capsys swaps per test
    configure_logging(level="WARNING")


@pytest.fixture
def seed() -> int:
    return TEST_SEED


@pytest.fixture
def small_chunks(monkeypatch):
    """Force several Monte Carlo chunks even for short runs"""
    monkeypatch.setattr(settings, "MC_CHUNK_TRIALS", 1000)
    return settings
