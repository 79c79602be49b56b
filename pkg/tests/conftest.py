import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# property suites run at least this many random cases each
N_CASES = 1000

settings.register_profile(
    "default", max_examples=N_CASES, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
