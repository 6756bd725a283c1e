import numpy as np
import pytest
from hypothesis import settings

from fdblowup.core import Annulus, Ball, ModelParams, SingularPoint, make_grid

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def single_point(lam=1.0, gamma=3.0, n=3, m=0.2, mu0=1.0, R=1.0, delta1=0.3, **kw):
    return ModelParams(n, m, (SingularPoint((0.0,) * n, lam, gamma),), mu0, Ball(R), delta1, **kw)


@pytest.fixture
def params3():
    return single_point()


@pytest.fixture
def ball_grid():
    return make_grid(Ball(1.0), 3, nodes=200)


@pytest.fixture
def annulus_grid():
    return make_grid(Annulus(0.1, 1.0), 3, nodes=41)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
