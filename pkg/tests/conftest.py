import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tfimmse.signals import Signal, analytic_signal

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_signal(n, seed, complex_=True, fs=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    if complex_:
        x = x + 1j * rng.standard_normal(n)
    return Signal(x, fs)


def random_analytic(n, seed, fs=1.0):
    return analytic_signal(random_signal(n, seed, complex_=False, fs=fs))


def interior(n):
    """Time slices with the full lag window."""
    return slice(n // 4, 3 * n // 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
