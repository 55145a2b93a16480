"""Frequency-uniform decomposition and modulation / Sobolev norms.

The 1-D window is the C-infinity bump ``b(t) = exp(-1/(1-t^2))`` on
``|t| < 1``, normalised over its integer translates::

    eta_k(xi) = b(xi - k) / sum_j b(xi - j)

so ``sum_k eta_k == 1`` exactly, ``0 <= eta_k <= 1`` and ``eta_k >= 1/2`` on
``[k - 1/2, k + 1/2]``.  The n-dimensional windows are tensor products
``sigma_k(xi) = eta_{k_1}(xi_1) ... eta_{k_n}(xi_n)``, supported in the cube
``|xi_i - k_i| < 1`` and hence in the ball ``|xi - k| < sqrt(n)``.

All per-box work is separable: a box is a small block of Fourier
coefficients times an outer product of 1-D weights, so its physical values
come from one small DFT matrix per axis instead of a full inverse FFT.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .grid import FOURIER, Field, Grid, l2_norm_fourier, lp_norm

WINDOW = "window"
SHARP = "sharp"

MODULATION_KINDS = ("M21", "M11")
SOBOLEV_KINDS = ("H", "Hdot")
NORM_KINDS = MODULATION_KINDS + SOBOLEV_KINDS + ("L",)


class EmptyBoxWarning(UserWarning):
    """``box`` was asked for an index outside the active set."""


class DegenerateNormError(ValueError):
    pass


def bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def eta(k: int, xi: np.ndarray) -> np.ndarray:
    """Normalised 1-D window centred at integer ``k``."""
    xi = np.asarray(xi, dtype=float)
    f = np.floor(xi)
    total = bump(xi - f) + bump(xi - f - 1.0)
    return bump(xi - k) / total


def bracket(k) -> float:
    """``<k> = 1 + |k|`` (Euclidean length)."""
    return 1.0 + float(np.linalg.norm(np.atleast_1d(k)))


@dataclass(frozen=True)
class NormSpec:
    kind: str
    s: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {NORM_KINDS}")
        if not math.isfinite(self.s):
            raise ValueError("regularity s must be finite")
        if not (self.p >= 1):
            raise ValueError(f"exponent p must lie in [1, inf], got {self.p}")


class WindowFamily:
    """Tensor-product window family on a grid's frequency lattice.

    Parameters
    ----------
    grid : Grid
        Must resolve unit cubes: lattice spacing ``pi/L <= 1/4``.
    """

    smoothness = math.inf

    def __init__(self, grid: Grid):
        if grid.dxi > 0.25 + 1e-15:
            raise ValueError(
                f"lattice spacing pi/L = {grid.dxi:.4f} > 1/4: unit cubes are under-resolved "
                f"(need L >= {4 * math.pi:.3f})")
        self.grid = grid
        self.kmax = int(math.ceil(grid.xi_max)) + 1
        self.k1 = np.arange(-self.kmax, self.kmax + 1)
        xi = grid.xi
        self.table = {
            WINDOW: np.stack([eta(int(k), xi) for k in self.k1]),
            SHARP: np.stack([((xi - k >= -0.5) & (xi - k < 0.5)).astype(float) for k in self.k1]),
        }

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def shape(self) -> tuple:
        """Shape of per-box arrays (one axis per dimension, indexed by ``k1``)."""
        return (self.k1.size,) * self.n

    def indices(self) -> Iterator[tuple]:
        """Active indices in lexicographic order."""
        for idx in np.ndindex(*self.shape):
            yield tuple(int(self.k1[i]) for i in idx)

    def is_active(self, k: Sequence[int]) -> bool:
        return len(k) == self.n and all(abs(int(ki)) <= self.kmax for ki in k)

    @cached_property
    def brackets(self) -> np.ndarray:
        """``<k>`` for every active index, shaped like per-box arrays."""
        sq = np.zeros(self.shape)
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.k1.size
            sq = sq + (self.k1.astype(float) ** 2).reshape(shp)
        return 1.0 + np.sqrt(sq)

    @cached_property
    def lower_bound(self) -> float:
        """Recorded ``c`` with ``sigma_k >= c`` on ``Q_k`` (lattice minimum)."""
        W = self.table[WINDOW]
        S = self.table[SHARP]
        vals = W[S > 0]
        return float(vals.min()) ** self.n

    @cached_property
    def derivative_bounds(self) -> tuple:
        """Sup norms of the first two derivatives of ``eta_0`` (fine-grid estimate)."""
        t = np.linspace(-1.0, 1.0, 40001)
        e = eta(0, t)
        d1 = np.gradient(e, t)
        d2 = np.gradient(d1, t)
        return float(np.abs(d1).max()), float(np.abs(d2).max())

    def sigma(self, k: Sequence[int], variant: str = WINDOW) -> np.ndarray:
        """Full-lattice multiplier ``sigma_k`` (or the sharp cube indicator)."""
        out = np.ones(self.grid.shape)
        for i, ki in enumerate(k):
            row = self._row(int(ki), variant)
            shp = [1] * self.n
            shp[i] = self.grid.N
            out = out * row.reshape(shp)
        return out

    def _row(self, k: int, variant: str) -> np.ndarray:
        if abs(k) > self.kmax:
            return np.zeros(self.grid.N)
        return self.table[variant][k + self.kmax]

    def partition_sum(self) -> np.ndarray:
        """``sum_k sigma_k`` on every lattice point."""
        W = self.table[WINDOW]
        out = np.ones(self.grid.shape)
        col = W.sum(axis=0)
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.grid.N
            out = out * col.reshape(shp)
        return out

    def overlap_count(self) -> np.ndarray:
        """Number of ``k`` with ``sigma_k != 0`` at every lattice point."""
        col = (self.table[WINDOW] > 0).sum(axis=0)
        out = np.ones(self.grid.shape, dtype=np.int64)
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.grid.N
            out = out * col.reshape(shp)
        return out

    # -- separable kernels -------------------------------------------------

    @cached_property
    def _support(self) -> dict:
        sup = {}
        for variant, tab in self.table.items():
            rows = []
            for r in tab:
                idx = np.nonzero(r)[0]
                rows.append((idx, r[idx]))
            sup[variant] = rows
        return sup

    @cached_property
    def _synth(self) -> dict:
        # per (variant, k): (N x |S|) matrix  w_m * exp(i xi_m x_j) / (2L)
        g = self.grid
        out = {}
        for variant, rows in self._support.items():
            mats = []
            for idx, w in rows:
                mats.append(np.exp(1j * np.outer(g.x, g.xi[idx])) * (w / (2.0 * g.L)))
            out[variant] = mats
        return out

    def box_l2_norms(self, coeffs: np.ndarray, variant: str = WINDOW) -> np.ndarray:
        """``||box_k f||_2`` for every active ``k`` via Plancherel."""
        P = np.abs(coeffs) ** 2
        T = self.table[variant] ** 2
        out = P
        for _ in range(self.n):
            # contract the leading lattice axis, append the k axis at the end
            out = np.tensordot(out, T, axes=([0], [1]))
        return np.sqrt(np.maximum(out, 0.0) / self.grid.volume)

    def box_block(self, coeffs: np.ndarray, k: Sequence[int], variant: str = WINDOW,
                  weights: Sequence[np.ndarray] | None = None) -> np.ndarray:
        """Physical values of ``box_k f`` from its Fourier coefficients.

        ``weights`` optionally gives one extra 1-D multiplier per axis (on the
        full lattice), e.g. ``i xi_j`` for a derivative.
        """
        sup = self._support[variant]
        mats = self._synth[variant]
        idxs, Es = [], []
        for i, ki in enumerate(k):
            j = int(ki) + self.kmax
            idx = sup[j][0]
            E = mats[j]
            if weights is not None and weights[i] is not None:
                E = E * weights[i][idx]
            idxs.append(idx)
            Es.append(E)
        block = coeffs[np.ix_(*idxs)]
        out = block
        for E in Es:
            out = np.tensordot(out, E, axes=([0], [1]))
        return out

    def boxes(self, coeffs: np.ndarray, variant: str = WINDOW, rtol: float = 0.0,
              weights: Sequence[np.ndarray] | None = None) -> Iterator[tuple]:
        """Yield ``(k, physical box values)`` in lexicographic order.

        Boxes whose Fourier l1 mass (an upper bound for their sup norm) is at
        most ``rtol`` times the total are skipped.
        """
        if rtol > 0:
            A = np.abs(coeffs)
            tab = self.table[variant]
            mass = A
            for _ in range(self.n):
                mass = np.tensordot(mass, tab, axes=([0], [1]))
            cut = rtol * A.sum()
        for idx in np.ndindex(*self.shape):
            if rtol > 0 and mass[idx] <= cut:
                continue
            k = tuple(int(self.k1[i]) for i in idx)
            yield k, self.box_block(coeffs, k, variant, weights)


def box(f: Field, k: Sequence[int], w: WindowFamily, variant: str = WINDOW) -> Field:
    """``box_k f``: Fourier coefficients of ``f`` multiplied by ``sigma_k``."""
    k = tuple(int(v) for v in k)
    if len(k) != w.n:
        raise ValueError(f"index {k} has wrong length for n={w.n}")
    if not w.is_active(k):
        warnings.warn(f"index {k} outside the active set; result has empty support", EmptyBoxWarning)
    return Field(f.grid, f.fourier() * w.sigma(k, variant), FOURIER)


def box_lp_norms(f: Field, w: WindowFamily, p: float = 2.0, variant: str = WINDOW,
                 rtol: float = 0.0) -> np.ndarray:
    """``||box_k f||_p`` for all active ``k`` (per-box array)."""
    coeffs = f.fourier()
    if p == 2:
        return w.box_l2_norms(coeffs, variant)
    out = np.zeros(w.shape)
    cell = w.grid.cell
    for k, vals in w.boxes(coeffs, variant, rtol=rtol):
        a = np.abs(vals)
        idx = tuple(ki + w.kmax for ki in k)
        out[idx] = a.max() if np.isinf(p) else (np.sum(a ** p) * cell) ** (1.0 / p)
    return out


def modulation_norm(f: Field, spec: NormSpec, w: WindowFamily, variant: str = WINDOW) -> float:
    """``sum_k <k>^s ||box_k f||_p`` for ``M21`` (p=2) or ``M11`` (p=1).

    ``variant="sharp"`` replaces ``sigma_k`` by the indicator of the
    half-open cube ``-1/2 <= xi_i - k_i < 1/2``; for ``M21`` that is the
    sharp-cube norm ``sum_k <k>^s ||F f||_{L^2(Q_k)}`` with Plancherel
    normalisation, so a single-cube field has norm ``<k>^s ||f||_2``.
    """
    if spec.kind not in MODULATION_KINDS:
        raise ValueError(f"{spec.kind} is not a modulation space")
    p = 2.0 if spec.kind == "M21" else 1.0
    pieces = box_lp_norms(f, w, p, variant)
    return float(np.sum((w.brackets ** spec.s * pieces).ravel()))


def sobolev_norm(f: Field, spec: NormSpec) -> float:
    """``||<xi>^s F f||`` with ``<xi> = (1 + |xi|^2)^{1/2}``, or ``|xi|^s`` for ``Hdot``."""
    g = f.grid
    if spec.kind == "L":
        return lp_norm(f, spec.p)
    if spec.kind not in SOBOLEV_KINDS:
        raise ValueError(f"{spec.kind} is not a Sobolev space")
    coeffs = f.fourier()
    xi2 = g.xi_sq()
    if spec.kind == "H":
        mult = (1.0 + xi2) ** (spec.s / 2.0)
    else:
        dc = xi2 == 0
        if spec.s < 0 and spec.s <= -g.n / 2.0 and np.any(coeffs[dc] != 0):
            raise DegenerateNormError(
                f"homogeneous norm with s={spec.s} <= -n/2 is infinite for a nonzero mean")
        mult = np.zeros_like(xi2)
        mult[~dc] = xi2[~dc] ** (spec.s / 2.0)
        if spec.s == 0:
            mult[dc] = 1.0
    return l2_norm_fourier(g, coeffs * mult)


def norm(f: Field, spec: NormSpec, w: WindowFamily | None = None, variant: str = WINDOW) -> float:
    """Dispatch on ``spec.kind``."""
    if spec.kind in MODULATION_KINDS:
        if w is None:
            w = WindowFamily(f.grid)
        return modulation_norm(f, spec, w, variant)
    return sobolev_norm(f, spec)


def embedding_constant(w: WindowFamily, s: float) -> float:
    """``max_k max_{xi in Q_k} (<xi>/<k>)^s`` over the lattice.

    With this factor ``||f||_{H^s} <= c ||f||_{M^s_{2,1}}`` (sharp cubes)
    holds exactly; ``c == 1`` at ``s == 0``.
    """
    g = w.grid
    xi = g.xi
    sharp = w.table[SHARP]
    cube = np.argmax(sharp, axis=0)          # cube index of each 1-D lattice point
    kk = w.k1[cube].astype(float)
    xi2 = np.zeros(g.shape)
    k2 = np.zeros(g.shape)
    for i in range(g.n):
        shp = [1] * g.n
        shp[i] = g.N
        xi2 = xi2 + (xi ** 2).reshape(shp)
        k2 = k2 + (kk ** 2).reshape(shp)
    ratio = np.sqrt(1.0 + xi2) / (1.0 + np.sqrt(k2))
    return max(1.0, float((ratio ** s).max()))


@dataclass
class EmbeddingReport:
    s: float
    eps: float
    constant: float
    rows: list = field(default_factory=list)   # (H^{s+eps+n/2}, M21^s, H^s)
    violations: int = 0
    degenerate: int = 0
    left_ratio: tuple = (math.nan, math.nan)    # min/max of M21 / H^{s+eps+n/2}
    right_ratio: tuple = (math.nan, math.nan)   # min/max of H^s / M21

    @property
    def ok(self) -> bool:
        return self.violations == 0


def embedding_monitor(samples: Sequence[Field], s: float, eps: float,
                      w: WindowFamily | None = None) -> EmbeddingReport:
    """Track ``H^{s+eps+n/2}``, ``M^s_{2,1}`` (sharp cubes) and ``H^s`` per sample.

    The right-hand embedding is asserted with :func:`embedding_constant`;
    the left-hand ratio is only reported.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not samples:
        return EmbeddingReport(s, eps, 1.0)
    grid = samples[0].grid
    w = w or WindowFamily(grid)
    c = embedding_constant(w, s)
    rep = EmbeddingReport(s, eps, c)
    left, right = [], []
    for f in samples:
        hi = sobolev_norm(f, NormSpec("H", s + eps + grid.n / 2.0))
        m = modulation_norm(f, NormSpec("M21", s), w, SHARP)
        lo = sobolev_norm(f, NormSpec("H", s))
        rep.rows.append((hi, m, lo))
        if m == 0.0:
            rep.degenerate += 1
            continue
        if lo > c * m * (1.0 + 1e-12):
            rep.violations += 1
        left.append(m / hi)
        right.append(lo / m)
    if left:
        rep.left_ratio = (min(left), max(left))
        rep.right_ratio = (min(right), max(right))
    return rep


def norm_rows(field_id: str, f: Field, specs: Sequence[NormSpec], w: WindowFamily | None = None) -> list:
    """CSV rows ``(field_id, space, s, value)``."""
    rows = []
    for spec in specs:
        space = spec.kind if spec.kind != "L" else f"L{spec.p:g}"
        rows.append((field_id, space, spec.s, norm(f, spec, w)))
    return rows
