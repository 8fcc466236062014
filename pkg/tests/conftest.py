import numpy as np
import pytest

from btquant import ModelKind, make_model


@pytest.fixture(scope="session")
def sphere():
    return make_model(ModelKind.SPHERE)


@pytest.fixture(scope="session")
def torus():
    return make_model(ModelKind.TORUS, tau=1j)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
