"""Pytest configuration and fixtures for tests."""
import numpy as np
import pytest

from src.services.cleanup_service import CleanupService


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical acceptance check")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="slow check; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def outputs_dir(tmp_path):
    """Per-test output directory."""
    path = tmp_path / "outputs"
    path.mkdir()
    return path


@pytest.fixture(autouse=True)
def cleanup_after_test(tmp_path):
    """
    Automatically clean up output CSVs and run directories after each test.

    This fixture runs automatically (autouse=True) so chains and coverage
    tables written by one test never leak into the next.
    """
    # Setup: nothing needed before test
    yield

    # Teardown: clean up after test
    cleanup = CleanupService(str(tmp_path / "outputs"))
    cleanup.cleanup_everything()


@pytest.fixture
def cleanup_service(outputs_dir):
    """Provide a cleanup service bound to the test's output directory."""
    return CleanupService(str(outputs_dir))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
