import numpy as np
import pytest

from skewloc.dynamics import Frequency
from skewloc.operator import sample_random_spec


@pytest.fixture(scope="session")
def golden():
    return Frequency.golden_mean()


@pytest.fixture(scope="session")
def spec1():
    return sample_random_spec(1, d=3, gamma=1e-3, C1=2.0, K_max=20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
