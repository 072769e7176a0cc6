"""Shared pytest fixtures."""

import os
import sys
import tempfile
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run full-resolution benchmark tests",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution benchmark run (needs --run-slow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def _write_conf(lines):
    with tempfile.NamedTemporaryFile(mode="w", suffix=".conf", delete=False) as f:
        f.write("# Test experiment\n")
        for line in lines:
            f.write(line + "\n")
        return f.name


@pytest.fixture
def small_ced_file():
    """Create a small linear CED experiment file."""
    temp_path = _write_conf([
        "problem.id=gaussian",
        "boundary.kind=ced",
        "domain.x_l=-5",
        "domain.x_r=5",
        "domain.orders=16,80,24",
        "time.scheme=cn",
        "time.final=0.01",
        "time.steps=20",
        "observe.stride=5",
    ])

    yield Path(temp_path)

    # Cleanup
    os.unlink(temp_path)


@pytest.fixture
def small_pml_file():
    """Create a small linear PML experiment file."""
    temp_path = _write_conf([
        "problem.id=gaussian",
        "boundary.kind=pml",
        "domain.x_l=-5",
        "domain.x_r=5",
        "domain.orders=16,80,16",
        "pml.delta=0.5",
        "pml.sigma0=50",
        "time.scheme=cn",
        "time.final=0.01",
        "time.steps=20",
        "observe.stride=10",
    ])

    yield Path(temp_path)

    # Cleanup
    os.unlink(temp_path)


@pytest.fixture
def bad_pml_file():
    """Create a PML experiment file missing pml.sigma0."""
    temp_path = _write_conf([
        "problem.id=gaussian",
        "boundary.kind=pml",
        "domain.orders=16,80,16",
        "pml.delta=0.5",
    ])

    yield Path(temp_path)

    # Cleanup
    os.unlink(temp_path)


@pytest.fixture
def clean_environ(monkeypatch):
    """Remove CEDSCHRO_* variables for the duration of a test."""
    for name in list(os.environ):
        if name.startswith("CEDSCHRO_"):
            monkeypatch.delenv(name)
    return monkeypatch
