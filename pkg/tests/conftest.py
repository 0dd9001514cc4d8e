import numpy as np
import pytest

from probewalk.gait import GaitParams, plan_gait
from probewalk.model import default_model


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def plan6(model):
    """Default 6-step plan shared by the simulation tests."""
    return plan_gait(GaitParams(), model)


@pytest.fixture(scope="session")
def plan8(model):
    """Longer plan used by the slope scenario."""
    return plan_gait(GaitParams(n_steps=8), model)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
