# tests/conftest.py
import os
import tempfile

# keep log files out of the working tree
os.environ.setdefault("LOG_DIR", os.path.join(tempfile.gettempdir(), "kcell_lab_test_logs"))
os.environ.setdefault("LOG_LEVEL", "WARNING")

import numpy as np
import pytest

from kcell_lab.core.config import get_settings
from kcell_lab.models.geometry import unit_ball, unit_square
from kcell_lab.models.samples import RngStream
from kcell_lab.services.quadrature import default_quadrature, spherical_design_3d


@pytest.fixture
def ball2():
    return unit_ball(2)


@pytest.fixture
def square():
    return unit_square()


@pytest.fixture
def quad2():
    return default_quadrature(2)


@pytest.fixture(scope="session")
def quad3_small():
    return spherical_design_3d(256)


@pytest.fixture
def rng():
    return RngStream(12345, 0)


@pytest.fixture
def fresh_settings():
    """Clear the cached Settings before and after a test that patches the environment"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def random_dirs():
    def make(count, d, seed=0):
        gen = np.random.default_rng(seed)
        U = gen.normal(size=(count, d))
        return U / np.linalg.norm(U, axis=1, keepdims=True)
    return make
