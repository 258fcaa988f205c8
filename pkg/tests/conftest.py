import numpy as np
import pytest

from cgrg.measures import ModelParameters


@pytest.fixture
def mono_params():
    """One colour, d=2, unit connection constant, torus."""
    return ModelParameters(
        k=1, d=2, nu=np.array([1.0]), C=np.array([[1.0]]), geometry="torus"
    )


@pytest.fixture
def two_colour_params():
    return ModelParameters(
        k=2,
        d=2,
        nu=np.array([0.3, 0.7]),
        C=np.array([[2.0, 0.5], [0.5, 1.0]]),
        geometry="torus",
    )
