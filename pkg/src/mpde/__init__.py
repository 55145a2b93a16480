"""Pseudospectral workbench for the derivative Ginzburg-Landau family and its
inviscid (Schroedinger) limit on a periodic torus."""

from .grid import Field, Grid, derivative, lp_norm, mixed_norm, to_fourier, to_physical
from .decomposition import NormSpec, WindowFamily, box, modulation_norm, sobolev_norm
from .propagators import apply_flow, duhamel
from .models import ModelParams, nonlinearity
from .solver import SolverConfig, Trajectory, solve, solve_picard, step_strang

__version__ = "0.1.0"

__all__ = [
    "Field", "Grid", "derivative", "lp_norm", "mixed_norm", "to_fourier", "to_physical",
    "NormSpec", "WindowFamily", "box", "modulation_norm", "sobolev_norm",
    "apply_flow", "duhamel", "ModelParams", "nonlinearity",
    "SolverConfig", "Trajectory", "solve", "solve_picard", "step_strang",
]
