"""Shared fixtures."""
import pytest

from models import AsymptoticConfig
from services.pareto_service import ParetoService
from services.saddle_service import SaddleService
from services.simulation_service import SimulationService
from utils.rng import SeededRng


@pytest.fixture
def base_cfg() -> AsymptoticConfig:
    """Figure 1 defaults at delta = 2."""
    return AsymptoticConfig(delta=2.0, sigma=1.0, v_norm=1.0, eps_train=0.0, eps_test=0.5)


@pytest.fixture
def trained_cfg(base_cfg) -> AsymptoticConfig:
    return base_cfg.with_(eps_train=0.5)


@pytest.fixture
def saddle() -> SaddleService:
    return SaddleService()


@pytest.fixture
def pareto() -> ParetoService:
    return ParetoService()


@pytest.fixture
def simulation() -> SimulationService:
    return SimulationService()


@pytest.fixture
def rng() -> SeededRng:
    return SeededRng(12345)
