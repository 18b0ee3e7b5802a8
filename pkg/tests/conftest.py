"""Shared fixtures: small spaces whose constants can be worked out by hand, plus seeded random ones."""

import numpy as np
import pytest

from core.generators import gen_fat_cantor, gen_fat_sierpinski
from core.kernels import KERNEL_RUNTIME
from core.space import MetricMeasureSpace


def line_space(n, weights=None, scale_window=None):
    coords = np.arange(n, dtype=np.float64)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    return MetricMeasureSpace.from_coords(coords, weights, scale_window=scale_window)


def random_space(seed, n=40, dim=2):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 10.0, size=(n, dim))
    weights = rng.uniform(0.5, 2.0, size=n)
    return MetricMeasureSpace.from_coords(coords, weights)


def tied_grid_space(side=6):
    """Unit grid: many equal distances, which is where radius ties bite."""
    axis = np.arange(side, dtype=np.float64)
    xx, yy = np.meshgrid(axis, axis, indexing='ij')
    coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
    return MetricMeasureSpace.from_coords(coords, np.ones(side * side))


def ring_space(n=8):
    """Shortest-path metric on a cycle, given as an explicit matrix."""
    i = np.arange(n)
    steps = np.abs(i[:, None] - i[None, :])
    matrix = np.minimum(steps, n - steps).astype(np.float64)
    return MetricMeasureSpace.from_matrix(matrix, np.ones(n))


@pytest.fixture
def line16():
    return line_space(16)


@pytest.fixture
def evens16(line16):
    return np.arange(16) % 2 == 0


@pytest.fixture
def ring8():
    return ring_space(8)


@pytest.fixture
def fat_cantor():
    return gen_fat_cantor(level=2)


@pytest.fixture
def fat_sierpinski():
    return gen_fat_sierpinski(level=1)


@pytest.fixture
def sequential_kernels():
    KERNEL_RUNTIME.configure(sequential=True)
    yield KERNEL_RUNTIME
    KERNEL_RUNTIME.configure(sequential=False)
