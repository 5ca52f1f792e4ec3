import pytest
from hypothesis import HealthCheck, settings

from helpers import cached_decomposition

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def benchmark_decomp():
    """tau = 0.25, N mu + 1 = 5 on the default graded grid."""
    return cached_decomposition(0.25, 5.0)
