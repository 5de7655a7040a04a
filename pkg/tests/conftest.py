"""
Shared fixtures for the test suite
"""
import logging

import numpy as np
import pytest

from spectra_lab.core.settings import get_settings
from spectra_lab.lattice.grid import GridSpec, build_grid
from spectra_lab.lattice.operators import SymmetricOperator


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Fresh settings per test, unaffected by a developer's .env"""
    monkeypatch.chdir(tmp_path)
    for name in ("DENSE_BUDGET", "NODE_BUDGET", "MAX_EIGENPAIRS", "LANCZOS_MAX_ITER", "KRYLOV_MAX_DIM", "WORKERS", "CACHE_DIR", "LOG_LEVEL", "LOG_JSON"):
        monkeypatch.delenv(f"SPECTRA_LAB_{name}", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def restore_root_logging():
    """The CLI reconfigures the root logger; put pytest's handlers back afterwards"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid_1d():
    """(0, pi) with 49 interior nodes, h = pi / 50"""
    return build_grid(GridSpec((0.0,), (np.pi,), (49,)))


@pytest.fixture
def grid_2d():
    """(0, 1)^2 with 10 x 10 interior nodes"""
    return build_grid(GridSpec((0.0, 0.0), (1.0, 1.0), (10, 10)))


def make_symmetric(rng: np.random.Generator, n: int, low: float = -2.0, high: float = 2.0) -> np.ndarray:
    """Random symmetric matrix with spectrum drawn uniformly from [low, high]"""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    values = rng.uniform(low, high, n)
    M = (Q * values) @ Q.T
    return (M + M.T) * 0.5


@pytest.fixture
def random_operator(rng):
    def factory(n: int = 30, low: float = -2.0, high: float = 2.0) -> SymmetricOperator:
        return SymmetricOperator.from_matrix(make_symmetric(rng, n, low, high))

    return factory
