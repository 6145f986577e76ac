"""Shared fixtures"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from utils.config import RunConfig  # noqa: E402
from volcore.synthetic import SyntheticSpec, make_synthetic_scan  # noqa: E402

SMALL_DIMS = (32, 32, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec():
    return SyntheticSpec(dims=SMALL_DIMS, radius_range=(5.0, 7.0))


@pytest.fixture
def small_scan(small_spec):
    return make_synthetic_scan("small_000", np.random.default_rng(7), small_spec)


@pytest.fixture
def small_config():
    """Reduced network and window sizes that keep CPU runs short"""
    return RunConfig(
        patch_dims=(16, 16, 16),
        channels=(4, 6, 8, 10),
        convs_per_stage=1,
        scales=(0.5, 1.0),
        window_size=(16, 16),
        K=4,
        proposals_per_window=60,
        anchor_sizes=(6, 12),
        detector_channels=4,
        iterations=20,
        batch_size=2,
        log_every=10,
    )
