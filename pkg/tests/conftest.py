"""Pytest configuration and fixtures for ntpt tests."""

import os

import numpy as np
import pytest

from src.neural import OracleFunction
from src.tasks import SymbolSource


def is_ci() -> bool:
    """Check if running in CI environment."""
    return os.environ.get("CI", "").lower() in ("true", "1", "yes")


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator, fresh per test."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def train_source() -> SymbolSource:
    """Small synthetic training split shared by the session."""
    return SymbolSource.synthetic("train", 5, 0)


@pytest.fixture(scope="session")
def test_source() -> SymbolSource:
    """Small synthetic test split shared by the session."""
    return SymbolSource.synthetic("test", 5, 0)


@pytest.fixture
def oracles() -> dict[str, OracleFunction]:
    """Perfect classifiers standing in for net_0 and net_1."""
    return {
        "net_0": OracleFunction("net_0", 10),
        "net_1": OracleFunction("net_1", 4),
    }


@pytest.fixture
def ci_aware_model_count() -> int:
    """Return reduced random-model count for CI, normal count otherwise."""
    return 200 if is_ci() else 1000


@pytest.fixture
def ci_aware_machine_count() -> int:
    """Return reduced random-machine count for CI."""
    return 50 if is_ci() else 200


# Configure pytest-timeout default
def pytest_configure(config: pytest.Config) -> None:
    """Configure pytest with CI-aware settings."""
    # Register custom markers
    config.addinivalue_line("markers", "slow: marks tests as slow (may skip in CI)")

    # Set default timeout if not specified
    if config.option.timeout is None:
        config.option.timeout = 120 if is_ci() else 300
