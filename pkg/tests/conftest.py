"""
Pytest configuration and shared fixtures for the Convex-Integration Workbench tests
"""
import json
import os

import numpy as np
import pytest

from src.iteration.parameters import Ladder
from src.torus.field import SpectralField, random_solenoidal
from src.torus.grid import Grid
from src.utils.config import WorkbenchSettings


@pytest.fixture
def sample_data():
    """Load sample test data from fixtures"""
    fixtures_path = os.path.join(os.path.dirname(__file__), 'fixtures', 'sample_data.json')
    with open(fixtures_path, 'r') as f:
        return json.load(f)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_field(rng):
    """Factory for random band-limited fields of a given rank."""
    def make(grid: Grid, rank: int = 1, band: float = 6.0) -> SpectralField:
        shape = (3,) * rank + grid.shape
        f = SpectralField.from_real(grid, rng.standard_normal(shape))
        return f.with_coeffs(np.where(grid.mode_magnitude <= band, f.coeffs, 0.0))
    return make


@pytest.fixture
def solenoidal_pair():
    """Factory for small mean-free divergence-free (v, b)."""
    def make(grid: Grid, amplitude: float = 0.01, band: float = 3.0, seed: int = 0):
        return (random_solenoidal(grid, amplitude, band, seed),
                random_solenoidal(grid, amplitude, band, seed + 1))
    return make


@pytest.fixture
def desk_settings():
    """Desk preset"""
    return WorkbenchSettings.desk()


@pytest.fixture
def desk_ladder():
    return Ladder()


@pytest.fixture
def workbench_environment(monkeypatch):
    """Environment overrides as the CLI would see them"""
    monkeypatch.setenv("WORKBENCH_GRID__N", "32")
    monkeypatch.setenv("WORKBENCH_SOLVER__DT", "1/128")
    yield


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers"""
    config.addinivalue_line(
        "markers", "unit: mark test as a unit test"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as an integration test"
    )
    config.addinivalue_line(
        "markers", "e2e: mark test as an end-to-end test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )
    config.addinivalue_line(
        "markers", "performance: mark test as a scaling or runtime report"
    )


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers based on file location"""
    for item in items:
        # Add markers based on test file location
        if "unit" in str(item.fspath):
            item.add_marker(pytest.mark.unit)
        elif "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
        elif "e2e" in str(item.fspath):
            item.add_marker(pytest.mark.e2e)

        # Mark slow tests
        if "performance" in str(item.fspath) or "e2e" in str(item.fspath):
            item.add_marker(pytest.mark.slow)
        if "performance" in str(item.fspath):
            item.add_marker(pytest.mark.performance)
