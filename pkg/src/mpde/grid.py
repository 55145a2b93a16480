"""Periodic grids, complex fields and the continuum-normalized DFT pair.

The torus is ``[-L, L)^n`` sampled with ``N`` points per axis.  The forward
transform carries the ``dx^n`` quadrature weight and the phase of the shifted
origin, so that ``to_fourier(f).values`` approximates the continuum transform
``int f(x) exp(-i xi.x) dx`` on the frequency lattice ``(pi/L) * m``.  The
inverse carries ``(2L)^{-n}``.  With this convention

    sum |f|^2 dx^n  ==  (2L)^{-n} sum |F f|^2

so every discrete norm approximates its continuum counterpart directly.

Arrays in Fourier representation are stored in FFT order (``numpy.fft``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

PHYSICAL = "physical"
FOURIER = "fourier"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^n`` with ``N`` points per axis."""

    n: int
    N: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension n must be 1, 2 or 3, got {self.n}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def cell(self) -> float:
        """Volume element ``dx^n``."""
        return self.dx ** self.n

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.n

    @property
    def dxi(self) -> float:
        """Spacing ``pi / L`` of the frequency lattice."""
        return np.pi / self.L

    @property
    def xi_max(self) -> float:
        return self.dxi * (self.N // 2)

    @cached_property
    def x(self) -> np.ndarray:
        """1-D physical coordinates, shared by every axis."""
        return -self.L + self.dx * np.arange(self.N)

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers ``m`` in FFT order, ``-N/2 <= m < N/2``."""
        return np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """1-D frequency lattice in FFT order."""
        return self.dxi * self.modes

    def coords(self) -> list:
        """Broadcastable physical coordinate arrays, one per axis."""
        return _broadcast_axes(self.x, self.n)

    def freqs(self) -> list:
        """Broadcastable frequency arrays, one per axis."""
        return _broadcast_axes(self.xi, self.n)

    def xi_sq(self) -> np.ndarray:
        """``|xi|^2`` on the full frequency lattice."""
        out = np.zeros(self.shape)
        for k in self.freqs():
            out = out + k * k
        return out

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i xi_m L) = (-1)^m accounts for the origin sitting at x = -L
        sign1 = np.where(self.modes % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for s in _broadcast_axes(sign1, self.n):
            out = out * s
        return out

    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of modes kept by the 2/3 rule (``|m_i| < N/3`` on every axis)."""
        keep1 = np.abs(self.modes) < self.N / 3.0
        out = np.ones(self.shape, dtype=bool)
        for k in _broadcast_axes(keep1, self.n):
            out = out & k
        return out

    def forward(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=self._axes) * (self.cell * self._phase)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(coeffs * self._phase, axes=self._axes) / self.cell

    @property
    def _axes(self) -> tuple:
        return tuple(range(self.n))


def _broadcast_axes(v: np.ndarray, n: int) -> list:
    out = []
    for i in range(n):
        shape = [1] * n
        shape[i] = v.size
        out.append(v.reshape(shape))
    return out


@dataclass(frozen=True, eq=False)
class Field:
    """Complex field on a grid, held in one representation.

    Fields are immutable: the value array is copied on construction and
    flagged read-only.
    """

    grid: Grid
    values: np.ndarray
    representation: str = PHYSICAL

    def __post_init__(self):
        if self.representation not in (PHYSICAL, FOURIER):
            raise ValueError(f"unknown representation {self.representation!r}")
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(*grid.coords()) * np.ones(grid.shape))

    @classmethod
    def zeros(cls, grid: Grid, representation: str = PHYSICAL) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), representation)

    def physical(self) -> np.ndarray:
        """Physical-space samples (a fresh array)."""
        if self.representation == PHYSICAL:
            return self.values.copy()
        return self.grid.inverse(self.values)

    def fourier(self) -> np.ndarray:
        """Fourier coefficients in FFT order (a fresh array)."""
        if self.representation == FOURIER:
            return self.values.copy()
        return self.grid.forward(self.values)

    def with_values(self, values: np.ndarray, representation: str | None = None) -> "Field":
        return Field(self.grid, values, representation or self.representation)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.physical() + other.physical())

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.physical() - other.physical())

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c, self.representation)

    __rmul__ = __mul__


def to_fourier(f: Field) -> Field:
    if f.representation == FOURIER:
        return f
    return Field(f.grid, f.grid.forward(f.values), FOURIER)


def to_physical(f: Field) -> Field:
    if f.representation == PHYSICAL:
        return f
    return Field(f.grid, f.grid.inverse(f.values), PHYSICAL)


def derivative_multiplier(grid: Grid, axis: int, order: float = 1, fractional: bool = False) -> np.ndarray:
    """Broadcastable Fourier multiplier for ``d^m/dx_i^m`` or ``D_{x_i}^s``.

    Integer ``order`` gives ``(i xi_i)^m`` with the Nyquist mode zeroed for
    odd ``m``.  ``fractional=True`` gives ``|xi_i|^s``; for ``s < 0`` the zero
    mode is set to 0.
    """
    if not 0 <= axis < grid.n:
        raise IndexError(f"axis {axis} out of range for n={grid.n}")
    xi = grid.xi
    if fractional:
        absxi = np.abs(xi)
        nz = absxi > 0
        mult = np.zeros(xi.shape, dtype=np.complex128)
        mult[nz] = absxi[nz] ** float(order)
        if order == 0:
            mult[~nz] = 1.0
    else:
        m = int(order)
        if m != order or m < 0:
            raise ValueError("integer derivative order must be a non-negative integer")
        mult = (1j * xi) ** m
        if m % 2:
            mult = np.where(grid.modes == -grid.N // 2, 0.0, mult)
    return _broadcast_axes(mult, grid.n)[axis]


def derivative(f: Field, axis: int, order: float = 1, fractional: bool = False) -> Field:
    """Spectral derivative of ``f`` along ``axis``, returned in ``f``'s representation."""
    mult = derivative_multiplier(f.grid, axis, order, fractional)
    out = Field(f.grid, f.fourier() * mult, FOURIER)
    return out if f.representation == FOURIER else to_physical(out)


def lp_norm(f: Field, p: float = 2.0) -> float:
    """Discrete ``L^p`` norm with the ``dx^n`` weight."""
    _check_p(p)
    a = np.abs(f.physical())
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * f.grid.cell) ** (1.0 / p))


def l2_norm_fourier(grid: Grid, coeffs: np.ndarray) -> float:
    """``L^2`` norm computed on the Fourier side (Parseval)."""
    return float(np.sqrt(np.sum(np.abs(coeffs) ** 2) / grid.volume))


def _check_p(p):
    if not (p >= 1):
        raise ValueError(f"exponent p must lie in [1, inf], got {p}")


def _weighted_norm(a: np.ndarray, p: float, w: float, axis: int) -> np.ndarray:
    if np.isinf(p):
        return a.max(axis=axis)
    return (np.sum(a ** p, axis=axis) * w) ** (1.0 / p)


def mixed_norm_array(data: np.ndarray, weights: Sequence[float], ordering: Iterable) -> float:
    """Nested discrete norm of ``|data|``.

    ``data`` has axis 0 = time and axes 1..n = space.  ``weights`` gives the
    quadrature weight per data axis.  ``ordering`` is a sequence of
    ``(axis, p)`` pairs, innermost first, where ``axis`` is ``"t"`` or a
    spatial index ``0..n-1`` (``"x0"`` style names also accepted).  Every
    axis must appear exactly once.
    """
    a = np.abs(np.asarray(data))
    if a.size == 0:
        raise ValueError("empty trajectory")
    ordering = list(ordering)
    data_axes = [_data_axis(ax) for ax, _ in ordering]
    if sorted(data_axes) != list(range(a.ndim)):
        raise ValueError(f"ordering must name each of the {a.ndim} axes once, got {ordering}")
    live = list(range(a.ndim))
    for (ax, p), dax in zip(ordering, data_axes):
        _check_p(p)
        pos = live.index(dax)
        a = _weighted_norm(a, float(p), weights[dax], pos)
        live.pop(pos)
    return float(a)


def _data_axis(ax) -> int:
    if ax == "t":
        return 0
    if isinstance(ax, str) and ax.startswith("x"):
        ax = int(ax[1:])
    return int(ax) + 1


def mixed_norm(traj, ordering: Iterable) -> float:
    """Nested space-time norm of a trajectory (see :func:`mixed_norm_array`).

    ``traj`` needs ``grid``, ``times`` and ``snapshots`` (physical fields).
    Time samples must be uniform; a single stamp gets unit time weight.
    """
    if len(traj.snapshots) == 0:
        raise ValueError("empty trajectory")
    times = np.asarray(traj.times, dtype=float)
    dt = time_weight(times)
    data = np.stack([s.physical() for s in traj.snapshots])
    grid = traj.grid
    return mixed_norm_array(data, [dt] + [grid.dx] * grid.n, ordering)


def time_weight(times: np.ndarray) -> float:
    if times.size < 2:
        return 1.0
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(steps.max(), 1e-300):
        raise ValueError("time samples must be uniform and increasing")
    return float(steps.mean())
