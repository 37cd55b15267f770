import numpy as np
import pytest

from kppflow.flows import cellular_flow, shear_flow, zero_flow
from kppflow.torus import Grid, ScalarField, make_grid


@pytest.fixture(scope="session")
def grid64():
    return make_grid(2, 64)


@pytest.fixture(scope="session")
def sin_shear(grid64):
    return shear_flow(grid64, [((1,), 1.0)], axis=0)


@pytest.fixture(scope="session")
def cellular32():
    return cellular_flow(make_grid(2, 32))


@pytest.fixture(scope="session")
def zero32():
    return zero_flow(make_grid(2, 32))


def sin_profile(n=256, modes=(1,), scale=1.0):
    return ScalarField.from_function(
        Grid((n,)), lambda y: scale * sum(np.sin(2 * np.pi * m * y) for m in modes)
    )


@pytest.fixture(scope="session")
def alpha():
    return sin_profile()
