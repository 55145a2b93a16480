import math

import numpy as np
import pytest

from mpde.grid import FOURIER, Field, Grid, to_physical


def random_field(grid, rng, band=None, dealiased=False, scale=1.0):
    """Complex normal physical field, optionally band-limited or 2/3-truncated."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if band is not None:
        keep = np.ones(grid.shape, dtype=bool)
        for k in grid.freqs():
            keep = keep & (np.abs(k) <= band)
        c = np.where(keep, c, 0)
    if dealiased:
        c = c * grid.dealias_mask()
    f = to_physical(Field(grid, c, FOURIER))
    return f * (scale / max(np.abs(f.values).max(), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid1():
    return Grid(1, 256, 16.0)


@pytest.fixture
def grid2():
    return Grid(2, 64, 4 * math.pi)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
