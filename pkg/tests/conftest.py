"""
Shared fixtures for the straightkit test suite.

Long end-to-end experiments are marked `slow` and only run with --runslow.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from straightkit.synth.synthgen import make_straight_chromosome, random_band_profile  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end experiment (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def bar_image():
    """Vertical 17-px bar, rows 50..160, centered on column 128 of a 256 canvas"""
    img = np.zeros((256, 256), dtype=np.float32)
    img[50:161, 120:137] = 0.7
    return img


@pytest.fixture
def small_chromosome():
    """Straight banded chromosome, 40 rows long, on a 64x64 canvas"""
    profile = random_band_profile(40, np.random.default_rng(0), min_band=3, max_band=6)
    return make_straight_chromosome(profile, 9.0, canvas=64)
