import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drivesim import _fastpath
from drivesim.scenario import preprocess
from drivesim.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture
def reference_path(monkeypatch):
    """Force the pure-numpy kernels for the duration of a test."""
    monkeypatch.setattr(_fastpath, "ENABLED", False)
    yield


@pytest.fixture(scope="session")
def straight_prepared():
    return preprocess(generate_synthetic(
        SyntheticSpec("straight_road", n_agents=8, seed=11)))


@pytest.fixture(scope="session")
def intersection_prepared():
    return preprocess(generate_synthetic(
        SyntheticSpec("intersection", n_agents=4, seed=5)))


def random_obb(rng: np.random.Generator, span=10.0):
    from drivesim.geometry import Obb, Vec2
    return Obb(center=Vec2(rng.uniform(-span, span), rng.uniform(-span, span)),
               half_length=rng.uniform(0.3, 3.0),
               half_width=rng.uniform(0.2, 2.0),
               heading=rng.uniform(-np.pi, np.pi))
