"""Shared strategies and helpers for the test suite."""

import numpy as np
import pytest

from wannloc import Grid


@pytest.fixture
def line():
    """Small 1-d grid, fine enough for quadrature oracles at 1e-3."""
    return Grid(d=1, L=2.0, h=1.0 / 64)


@pytest.fixture
def plane():
    """Coarse 2-d grid for structural (non-quadrature) checks."""
    return Grid(d=2, L=2.0, h=0.125)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def random_function(grid, rng, complex_valued=True):
    vals = rng.standard_normal(grid.n_points)
    if complex_valued:
        vals = vals + 1j * rng.standard_normal(grid.n_points)
    return grid.function(vals)
