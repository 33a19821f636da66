import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_challenges(seed, count, n):
    return np.random.default_rng(seed).integers(0, 2, size=(count, n), dtype=np.uint8)


@pytest.fixture
def challenges64():
    return random_challenges(777, 2000, 64)
