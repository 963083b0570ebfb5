import numpy as np
import pytest

from tomosel import NoiseModel, RiskSetup, default_phantom
from tomosel.estimator import CoefficientDesign, IndexSets
from tomosel.phantoms import Bump, Phantom

SEED = 20240


@pytest.fixture(scope="session")
def phantom():
    return default_phantom()


@pytest.fixture(scope="session")
def unit_bump():
    return Phantom((Bump((0.0, 0.0), 1.0, 1.0, 2),))


@pytest.fixture(scope="session")
def zero_phantom():
    return Phantom(())


@pytest.fixture(scope="session")
def design():
    return CoefficientDesign(IndexSets(8, 2), 34, 1.0)


@pytest.fixture(scope="session")
def desk(phantom):
    return RiskSetup(phantom, 8, 34, delta=0.1)


@pytest.fixture(scope="session")
def gaussian():
    return NoiseModel("gaussian", 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)
