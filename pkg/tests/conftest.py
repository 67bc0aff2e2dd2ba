import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "kmono", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("kmono")


def random_nodes(rng, k, min_ratio=0.2):
    """``2k - 2`` nodes on a random span whose gaps differ by at most ``1 / min_ratio``."""
    q = 2 * k - 2
    gaps = rng.uniform(min_ratio, 1.0, q - 1)
    span = rng.uniform(0.5, 2.0)
    start = rng.uniform(-1.0, 1.0)
    return start + span * np.concatenate([[0.0], np.cumsum(gaps) / gaps.sum()])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
