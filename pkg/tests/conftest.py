import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from secrecy_region.model import ChannelSet

settings.register_profile("repo", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def cn(rng, *shape):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, n_t, n_r):
    return ChannelSet(tuple(cn(rng, r, n_t) for r in n_r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
