import numpy as np
import pytest

from sparsens.registry import load_registry


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
