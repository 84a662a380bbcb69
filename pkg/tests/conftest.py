"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from cvlearn.demand import LinearDemand, MnlDemand, PriceBox
from cvlearn.design import ExperimentDesign, build_design
from cvlearn.equilibrium import SolverConfig, get_default_config, set_default_config
from cvlearn.models import DesignKind

PLANS_DIR = Path(__file__).resolve().parent.parent / "plans"


def pytest_configure(config: pytest.Config) -> None:
    """Register custom markers."""
    config.addinivalue_line("markers", "slow: marks Monte Carlo acceptance runs (deselect with '-m \"not slow\"')")


@pytest.fixture(autouse=True)
def _restore_solver_config():
    saved = get_default_config()
    yield
    set_default_config(saved)


@pytest.fixture
def symmetric_box() -> PriceBox:
    return PriceBox(lower=[1.0, 1.0], upper=[9.0, 9.0])


@pytest.fixture
def symmetric_linear(symmetric_box: PriceBox) -> LinearDemand:
    """Symmetric linear duopoly: Nash 25/4, CV(a) 25/(4 - a)."""
    return LinearDemand(a=[100.0, 100.0], b=[[10.0, 4.0], [4.0, 10.0]], box=symmetric_box)


@pytest.fixture
def asymmetric_box() -> PriceBox:
    return PriceBox(lower=[0.5, 3.0], upper=[3.0, 10.0])


@pytest.fixture
def asymmetric_linear(asymmetric_box: PriceBox) -> LinearDemand:
    """Asymmetric linear duopoly with Nash (828/479, 3080/479)."""
    return LinearDemand(a=[80.0, 150.0], b=[[25.0, 1.0], [2.5, 12.0]], box=asymmetric_box)


@pytest.fixture
def mnl_symmetric() -> MnlDemand:
    box = PriceBox(lower=[0.5, 0.5, 0.5], upper=[4.0, 4.0, 4.0])
    return MnlDemand(a=[1.0, 1.0, 1.0], b=[1.0, 1.0, 1.0], box=box)


@pytest.fixture
def mnl_asymmetric() -> MnlDemand:
    box = PriceBox(lower=[0.5, 0.5], upper=[5.0, 6.0])
    return MnlDemand(a=[2.0, 1.5], b=[1.2, 0.8], box=box)


@pytest.fixture
def independent_design() -> ExperimentDesign:
    return build_design(DesignKind.INDEPENDENT, q=[0.5, 0.5])


@pytest.fixture
def fast_solver() -> SolverConfig:
    """Coarser contraction scans for tests that solve many equilibria."""
    return SolverConfig(grid_resolution=16)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def plans_dir() -> Path:
    return PLANS_DIR
