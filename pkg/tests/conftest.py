import warnings

import numpy as np
import pytest

from stcontrol.mesh import kuhn_grid


@pytest.fixture(scope="session")
def mesh3_n4():
    return kuhn_grid(3, 4)


@pytest.fixture(scope="session")
def mesh2_n2():
    return kuhn_grid(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _quiet_varrho_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="varrho > 1")
        yield
