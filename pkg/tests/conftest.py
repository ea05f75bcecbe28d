import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochfd.dataset import DensitySpeedDataset
from stochfd.synthetic import synthetic_dataset

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def traffic():
    """400 synthetic loop-detector observations around a Cheng curve."""
    return synthetic_dataset(400, seed=7)


def random_dataset(rng, n, lo=1.0, hi=120.0):
    rho = np.sort(rng.uniform(lo, hi, n))
    v = np.maximum(65.0 * np.exp(-rho / 45.0) + 2.0 * rng.standard_normal(n), 0.0)
    return DensitySpeedDataset(rho, v)
