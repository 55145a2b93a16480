"""Initial-data recipes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FOURIER, Field, Grid, l2_norm_fourier, to_physical

PROFILES = ("gaussian", "random")


@dataclass(frozen=True)
class InitialRecipe:
    profile: str = "gaussian"
    amplitude: float = 0.05
    width: float = 1.0
    seed: int = 0
    band: float = 4.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if not self.width > 0 or not self.band > 0:
            raise ValueError("width and band must be positive")

    def build(self, grid: Grid) -> Field:
        if self.profile == "gaussian":
            r2 = sum(x * x for x in grid.coords())
            return Field(grid, self.amplitude * np.exp(-r2 / (2.0 * self.width ** 2)))
        f = random_trig_polynomial(grid, self.band, np.random.default_rng(self.seed))
        norm = l2_norm_fourier(grid, f.values)
        return to_physical(Field(grid, f.values * (self.amplitude / norm), FOURIER))


def random_trig_polynomial(grid: Grid, band: float, rng: np.random.Generator) -> Field:
    """Complex normal coefficients on every lattice mode with ``|xi_i| <= band``.

    Returned in Fourier representation.
    """
    keep1 = np.abs(grid.xi) <= band
    mask = np.ones(grid.shape, dtype=bool)
    for i in range(grid.n):
        shp = [1] * grid.n
        shp[i] = grid.N
        mask = mask & keep1.reshape(shp)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, np.where(mask, coeffs, 0.0), FOURIER)
