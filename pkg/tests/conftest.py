import numpy as np
import pytest

from dcflow import make_double_well, make_quadratic


@pytest.fixture(scope="session")
def quad_canonical():
    """g = x'x, h = x'x/2, so f = |x|^2/2 with metric 2I."""
    return make_quadratic(2.0 * np.eye(2), np.eye(2))


@pytest.fixture(scope="session")
def dw_unit():
    return make_double_well([1.0, 1.0])


@pytest.fixture(scope="session")
def dw_aniso():
    return make_double_well([1.0, 4.0])
