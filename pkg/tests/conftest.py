import numpy as np
import pytest

from dynfactor.panel import Panel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel(rng):
    return Panel(rng.standard_normal((6, 40)))


def ar1(rng, n, T, phi, burn=500):
    e = rng.standard_normal((n, T + burn))
    x = np.empty_like(e)
    x[:, 0] = e[:, 0]
    for t in range(1, T + burn):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    return x[:, burn:]
