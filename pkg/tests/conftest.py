import copy

import numpy as np
import pytest

from enclosure_lab.scene import EXAMPLE_DOCUMENTS, example_scene
from enclosure_lab.stationary import find_pairs


@pytest.fixture(scope="session")
def cfg1():
    return example_scene("cfg1")


@pytest.fixture(scope="session")
def cfg1_pair(cfg1):
    (pair,) = find_pairs(cfg1)
    return pair


@pytest.fixture
def cfg1_document():
    return copy.deepcopy(EXAMPLE_DOCUMENTS["cfg1"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_rotation(rng):
    def draw() -> np.ndarray:
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return q

    return draw
