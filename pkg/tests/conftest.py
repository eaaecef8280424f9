import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "research",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("research")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symbol(rng, p=2, q=2, kappa_range=(0.0, 0.8)):
    """A generic two-sided hopping symbol with a lossy on-site term."""
    from nonbloch import LaurentSymbol

    coeffs = {}
    for n in range(-q, p + 1):
        if n == 0:
            continue
        if abs(n) == 1 or rng.random() < 0.7:
            coeffs[n] = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
    coeffs[0] = complex(rng.uniform(-0.5, 0.5), -rng.uniform(*kappa_range))
    return LaurentSymbol(coeffs)
