import numpy as np
import pytest

from projgeo import catalog


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def circle():
    return catalog.unit_circle()


@pytest.fixture(scope="session")
def sphere2():
    return catalog.sphere(2.0, 3)


@pytest.fixture(scope="session")
def torus25():
    return catalog.torus(2.0, 0.5)


@pytest.fixture(scope="session")
def hp():
    return catalog.half_parabola()


@pytest.fixture(scope="session")
def para():
    return catalog.parabola()


@pytest.fixture(scope="session")
def flat_line():
    return catalog.line()


@pytest.fixture(scope="session")
def lip1():
    return catalog.lip1_example()
