import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def lists(a):
    return np.asarray(a).tolist()
