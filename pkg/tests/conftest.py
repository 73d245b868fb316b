import os

import numpy as np
import pytest

from ann_core import Activation
from serialization import load_mdp_model


INSTANCES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "instances")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def relu():
    return Activation.leaky_relu(0.0)


@pytest.fixture(scope="session")
def grid_model():
    return load_mdp_model(os.path.join(INSTANCES, "grid16.json"))


@pytest.fixture
def instances_dir():
    return INSTANCES
