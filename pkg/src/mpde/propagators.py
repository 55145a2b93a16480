"""Exact linear flows and the Duhamel integral.

``G_nu(t)`` is the Fourier multiplier ``exp(-(i + nu) t |xi|^2)``; ``S(t)`` is
``G_0(t)``.  Forward time only when ``nu > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomposition import WINDOW, WindowFamily
from .grid import FOURIER, Field, Grid, time_weight, to_physical


class BackwardDiffusionError(ValueError):
    """Negative time with positive viscosity."""


def flow_symbol(grid: Grid, t: float, nu: float) -> np.ndarray:
    if t < 0 and nu > 0:
        raise BackwardDiffusionError(f"t={t} < 0 with nu={nu} > 0 is ill-posed")
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    return np.exp(-(1j + nu) * t * grid.xi_sq())


def apply_flow(f: Field, t: float, nu: float) -> Field:
    """``G_nu(t) f``, returned in ``f``'s representation."""
    if t == 0:
        return f
    out = Field(f.grid, f.fourier() * flow_symbol(f.grid, t, nu), FOURIER)
    return out if f.representation == FOURIER else to_physical(out)


def duhamel_coeffs(grid: Grid, forcing: Sequence[np.ndarray], dt: float, nu: float) -> list:
    """Trapezoid Duhamel integrals at every node, all in Fourier coefficients.

    ``forcing[j]`` holds the coefficients of ``f(j dt)``.  Returns ``A_j``
    approximating ``int_0^{j dt} G_nu(j dt - tau) f(tau) dtau`` by the
    composite trapezoid rule, built by the exact recursion
    ``A_{j+1} = G(dt) A_j + dt/2 (G(dt) f_j + f_{j+1})``.
    """
    E = flow_symbol(grid, dt, nu)
    acc = np.zeros(grid.shape, dtype=np.complex128)
    out = [acc]
    for j in range(len(forcing) - 1):
        acc = E * acc + 0.5 * dt * (E * forcing[j] + forcing[j + 1])
        out.append(acc)
    return out


def duhamel(f_samples, nu: float, t: float | None = None) -> Field:
    """``A_nu f (t)`` from uniformly sampled forcing.

    ``f_samples`` is a trajectory-like object (``grid``, ``times``,
    ``snapshots``) sampled on ``[0, t]``; ``t`` defaults to the last stamp.
    """
    times = np.asarray(f_samples.times, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two forcing samples")
    dt = time_weight(times)
    if abs(times[0]) > 1e-12 * max(1.0, dt):
        raise ValueError("forcing must start at tau = 0")
    if t is None:
        t = float(times[-1])
    steps = t / dt
    m = int(round(steps))
    if abs(steps - m) > 1e-9 * max(1.0, steps) or m >= times.size:
        raise ValueError(f"forcing samples do not cover [0, {t}] on the dt={dt} lattice")
    grid = f_samples.grid
    coeffs = [s.fourier() for s in f_samples.snapshots[: m + 1]]
    return Field(grid, duhamel_coeffs(grid, coeffs, dt, nu)[m], FOURIER)


@dataclass
class MultiplierProbeReport:
    k: tuple
    p: float
    t_grid: list
    nu_grid: list
    ratios: np.ndarray                      # [t, nu]
    normalized: np.ndarray = field(init=False)

    def __post_init__(self):
        n = len(self.k)
        tt = np.asarray(self.t_grid, dtype=float)[:, None]
        self.normalized = self.ratios / (1.0 + tt ** (n / 2.0))

    @property
    def constant(self) -> float:
        """Empirical ``max ratio / (1 + t^{n/2})``."""
        return float(self.normalized.max())


def flow_multiplier_probe(u0: Field, k: Sequence[int], t_grid: Sequence[float],
                          nu_grid: Sequence[float], p: float,
                          w: WindowFamily | None = None) -> MultiplierProbeReport:
    """Ratios ``||box_k G_nu(t) u0||_p / ||box_k u0||_p`` on a (t, nu) table."""
    w = w or WindowFamily(u0.grid)
    k = tuple(int(v) for v in k)
    base = w.box_block(u0.fourier(), k, WINDOW)
    base_norm = _lp(base, p, u0.grid.cell)
    if base_norm == 0:
        raise ValueError(f"probe field has no content in box {k}")
    ratios = np.zeros((len(t_grid), len(nu_grid)))
    coeffs = u0.fourier()
    for a, t in enumerate(t_grid):
        for b, nu in enumerate(nu_grid):
            c = coeffs * flow_symbol(u0.grid, t, nu)
            ratios[a, b] = _lp(w.box_block(c, k, WINDOW), p, u0.grid.cell) / base_norm
    return MultiplierProbeReport(k, p, list(t_grid), list(nu_grid), ratios)


def _lp(vals: np.ndarray, p: float, cell: float) -> float:
    a = np.abs(vals)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * cell) ** (1.0 / p))
