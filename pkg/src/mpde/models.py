"""Right-hand sides of the derivative Ginzburg-Landau family.

Every physical-space product is followed by 2/3-rule truncation; derivatives
are Fourier multipliers.  Nonlinearities are returned as Fourier
coefficients internally so the solver avoids redundant transforms.

Kinds:

``dcgl_cubic``
    ``lambda1 . grad(|u|^2 u) + (lambda2 . grad u)|u|^2 + alpha |u|^{2 delta} u``
``dnls_cubic``
    same right-hand side, ``nu == 0``
``cgl_power``
    ``alpha |u|^{2 delta} u`` only
``quadratic``
    ``lambda . grad(u^2)``
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grid import FOURIER, Field, Grid, derivative_multiplier, to_physical

KINDS = ("dcgl_cubic", "dnls_cubic", "cgl_power", "quadratic")


def _as_vector(v) -> tuple:
    if np.isscalar(v):
        return (complex(v),)
    return tuple(complex(x) for x in v)


@dataclass(frozen=True)
class ModelParams:
    kind: str = "dcgl_cubic"
    nu: float = 0.0
    lambda1: tuple = (0j,)
    lambda2: tuple = (0j,)
    lam: tuple = (0j,)
    alpha: complex = 0j
    delta: int = 1

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lam"):
            object.__setattr__(self, name, _as_vector(getattr(self, name)))
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu}")
        if int(self.delta) != self.delta or self.delta < 1:
            raise ValueError(f"delta must be a positive integer, got {self.delta}")
        object.__setattr__(self, "delta", int(self.delta))
        nz = lambda v: any(x != 0 for x in v)
        if self.kind == "dnls_cubic" and self.nu != 0:
            raise ValueError("dnls_cubic is the nu = 0 equation")
        if self.kind == "cgl_power" and (nz(self.lambda1) or nz(self.lambda2)):
            raise ValueError("cgl_power takes no derivative coefficients")
        if self.kind == "quadratic" and (nz(self.lambda1) or nz(self.lambda2) or self.alpha != 0):
            raise ValueError("quadratic kind reads only lam")
        if self.kind != "quadratic" and nz(self.lam):
            raise ValueError(f"{self.kind} does not read lam")

    def with_nu(self, nu: float) -> "ModelParams":
        kind = self.kind
        if kind == "dnls_cubic" and nu != 0:
            kind = "dcgl_cubic"
        return replace(self, kind=kind, nu=nu)

    @property
    def is_linear(self) -> bool:
        vals = self.lambda1 + self.lambda2 + self.lam + (self.alpha,)
        return all(v == 0 for v in vals)

    def vector(self, name: str, n: int) -> np.ndarray:
        v = getattr(self, name)
        if len(v) == 1:
            return np.full(n, v[0], dtype=np.complex128)
        if len(v) != n:
            raise ValueError(f"{name} has length {len(v)}, expected 1 or {n}")
        return np.asarray(v, dtype=np.complex128)


class _Ops:
    """Cached per-grid multipliers."""

    _cache: dict = {}

    def __init__(self, grid: Grid):
        self.grid = grid
        self.mask = grid.dealias_mask()
        self.ddx = [derivative_multiplier(grid, i, 1) for i in range(grid.n)]

    @classmethod
    def get(cls, grid: Grid) -> "_Ops":
        ops = cls._cache.get(grid)
        if ops is None:
            ops = cls._cache[grid] = cls(grid)
        return ops

    def trunc(self, a: np.ndarray) -> np.ndarray:
        """Product in physical space -> truncated Fourier coefficients."""
        return self.grid.forward(a) * self.mask

    def phys(self, c: np.ndarray) -> np.ndarray:
        return self.grid.inverse(c)


def nonlinearity_coeffs(grid: Grid, coeffs: np.ndarray, p: ModelParams) -> np.ndarray:
    """Fourier coefficients of the model's nonlinearity at state ``coeffs``."""
    n = grid.n
    ops = _Ops.get(grid)
    out = np.zeros(grid.shape, dtype=np.complex128)
    if p.is_linear:
        return out
    u = ops.phys(coeffs)
    if p.kind == "quadratic":
        lam = p.vector("lam", n)
        sq = ops.trunc(u * u)
        for i in range(n):
            if lam[i] != 0:
                out += lam[i] * ops.ddx[i] * sq
        return out
    l1 = p.vector("lambda1", n)
    l2 = p.vector("lambda2", n)
    mod2 = ops.phys(ops.trunc(u * np.conj(u)))
    if np.any(l1 != 0):
        cubic = ops.trunc(mod2 * u)
        for i in range(n):
            if l1[i] != 0:
                out += l1[i] * ops.ddx[i] * cubic
    if np.any(l2 != 0):
        grad = np.zeros(grid.shape, dtype=np.complex128)
        for i in range(n):
            if l2[i] != 0:
                grad += l2[i] * (ops.ddx[i] * coeffs)
        out += ops.trunc(ops.phys(grad) * mod2)
    if p.alpha != 0:
        power = mod2
        for _ in range(p.delta - 1):
            power = ops.phys(ops.trunc(power * mod2))
        out += p.alpha * ops.trunc(power * u)
    return out


def nonlinearity(u: Field, p: ModelParams) -> Field:
    """The model nonlinearity as a physical-space field."""
    return to_physical(Field(u.grid, nonlinearity_coeffs(u.grid, u.fourier(), p), FOURIER))


def derivative_terms_expanded(u: Field, lambda1: Sequence, lambda2: Sequence) -> Field:
    """``sum_i [l1_i (d_i conj u) u^2 + (2 l1_i + l2_i)(d_i u) u conj u]``.

    Product-rule expansion of the two derivative terms, with the same
    truncation after each product.  Used as an independent check of
    :func:`nonlinearity`.
    """
    g = u.grid
    ops = _Ops.get(g)
    c = u.fourier()
    phys = ops.phys(c)
    sq = ops.phys(ops.trunc(phys * phys))
    mod2 = ops.phys(ops.trunc(phys * np.conj(phys)))
    l1 = ModelParams(lambda1=lambda1).vector("lambda1", g.n)
    l2 = ModelParams(lambda2=lambda2).vector("lambda2", g.n)
    out = np.zeros(g.shape, dtype=np.complex128)
    for i in range(g.n):
        du = ops.phys(ops.ddx[i] * c)
        if l1[i] != 0:
            out += l1[i] * ops.trunc(np.conj(du) * sq)
        coef = 2 * l1[i] + l2[i]
        if coef != 0:
            out += coef * ops.trunc(du * mod2)
    return to_physical(Field(g, out, FOURIER))


def derivative_terms_direct(u: Field, lambda1: Sequence, lambda2: Sequence) -> Field:
    """``lambda1 . grad(|u|^2 u) + (lambda2 . grad u)|u|^2`` via :func:`nonlinearity`."""
    p = ModelParams(kind="dcgl_cubic", lambda1=lambda1, lambda2=lambda2)
    return nonlinearity(u, p)
