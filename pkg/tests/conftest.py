"""Pytest configuration and fixtures."""

import pytest
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.config import get_settings  # noqa: E402
from src.core.montecarlo import McConfig  # noqa: E402
from src.core.params import MgfMode, ProbMode, SystemParams  # noqa: E402
from src.logger import close_file_logger  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point traces at a temporary directory and drop cached settings."""
    monkeypatch.setenv("NFFEC_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("NFFEC_METRICS_TEXTFILE", raising=False)
    get_settings.cache_clear()
    yield get_settings()
    close_file_logger()
    get_settings.cache_clear()


@pytest.fixture
def params():
    """Default link: 28 GHz, L_t = 100 lambda, L_r = 25 lambda, sigma_d = 5 m."""
    return SystemParams()


@pytest.fixture
def literal_params():
    return SystemParams(prob_mode=ProbMode.PAPER_LITERAL, mgf_mode=MgfMode.PAPER_LITERAL)


@pytest.fixture
def small_mc():
    """Monte Carlo run small enough for unit tests."""
    return McConfig(n_samples=200_000, seed=7, batches=100)
