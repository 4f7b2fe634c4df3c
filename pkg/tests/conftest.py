# flake8: noqa: E501
"""
Shared pytest setup: import paths, the ``slow`` marker and small law fixtures.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src and scripts to path for imports
ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "scripts"))

from core.laws import InitialLaw, Maxwellian, SpatialPointMass, UniformSpatial, VelocityPointMass


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale sweep, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def g0():
    return Maxwellian(1.0)


@pytest.fixture
def f0_rest():
    """Uniform position, velocity pinned at the origin."""
    return InitialLaw(UniformSpatial(), VelocityPointMass((0.0, 0.0, 0.0)))


@pytest.fixture
def f0_maxwellian():
    return InitialLaw(UniformSpatial(), Maxwellian(1.0))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))
