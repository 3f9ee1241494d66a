import numpy as np
import pytest

from monoloc.simulate import generate_scene, generate_sequence


@pytest.fixture(scope="session")
def scene42():
    return generate_scene(seed=42)


@pytest.fixture(scope="session")
def cv_sequence():
    return generate_sequence(50, "constant_velocity", seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
