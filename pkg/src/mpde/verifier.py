"""Numerical probes of the analytical estimates behind the solver.

Three probes:

* interpolation inequalities between weighted modulation norms and ``L^2``
  or ``L^1`` with the constant assembled from the finite active set;
* the 1-D Kato smoothing ratio ``R(k, nu)`` of the viscous flow, computed
  with exact time integrals (a Gram matrix over the box's lattice modes);
* the oscillatory kernel
  ``K(tau, z) = p.v. int e^{i z xi} xi / (tau + xi^2 - i nu (xi^2 + s)) dxi``
  by symmetric principal-value quadrature plus an analytic tail.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre, sici

from .decomposition import WINDOW, WindowFamily, box_lp_norms, eta
from .grid import Field, Grid, l2_norm_fourier, lp_norm, to_physical
from .initial import random_trig_polynomial

M21 = "M21"
M11 = "M11"


class ProbeConfigError(ValueError):
    """Probe parameters outside the range the quadrature can certify."""


# -- interpolation -------------------------------------------------------------

def lattice_tail_sum(n: int) -> float:
    """``sum_{k in Z^n} <k>^{-2}`` with ``<k> = 1 + |k|``; infinite for n >= 2."""
    if n == 1:
        return math.pi ** 2 / 3.0 - 1.0
    return math.inf


@dataclass(frozen=True)
class InterpolationCase:
    """Parameters of one interpolation inequality.

    ``theta = eps / (s + eps)``.  For ``M21``
    ``||f||_{M^s_{2,1}} <= C^theta ||f||_{M^{s+}_{2,1}}^{1-2 theta} ||f||_2^{2 theta}``
    with ``s+ = (s + 2 theta) / (1 - 2 theta)``; for ``M11``
    ``||f||_{M^s_{1,1}} <= (C B)^theta ||f||_{M^{s+}_{1,1}}^{1-theta} ||f||_1^theta``
    with ``s+ = (s + 2 theta) / (1 - theta)``, where ``B`` bounds
    ``||box_k||_{L^1 -> L^1}``.  ``C = sum_k <k>^{-2}`` over the active set.
    """

    s: float
    eps: float
    variant: str = M21

    def __post_init__(self):
        if self.variant not in (M21, M11):
            raise ValueError(f"variant must be {M21!r} or {M11!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.s + self.eps > 0:
            raise ValueError("s + eps must be positive")
        th = self.theta
        upper = 0.5 if self.variant == M21 else 1.0
        if not 0 < th < upper:
            raise ValueError(f"theta = {th:.4g} outside (0, {upper}) for {self.variant}")

    @property
    def theta(self) -> float:
        return self.eps / (self.s + self.eps)

    @property
    def s_plus(self) -> float:
        th = self.theta
        if self.variant == M21:
            return (self.s + 2 * th) / (1 - 2 * th)
        return (self.s + 2 * th) / (1 - th)

    @property
    def exponents(self) -> tuple:
        """Powers of the ``M^{s+}`` norm and of the Lebesgue norm."""
        th = self.theta
        return (1 - 2 * th, 2 * th) if self.variant == M21 else (1 - th, th)

    def tail_sum(self, w: WindowFamily) -> float:
        return float(np.sum(w.brackets ** -2.0))

    def constant(self, w: WindowFamily) -> float:
        """The l^q norm of ``<k>^{-2 theta/(1-theta)}`` (M21) or of ``<k>^{-2 theta}`` (M11)."""
        th = self.theta
        t = self.tail_sum(w)
        return t ** (th / (1 - th)) if self.variant == M21 else t ** th


@dataclass
class InterpolationVerdict:
    lhs: float
    rhs: float
    passed: bool
    slack: float                          # rhs / lhs
    degenerate: bool = False
    constant: float = math.nan            # C as defined by the case
    factor: float = math.nan              # multiplicative constant actually used
    lattice_tail_sum: float = math.nan


def box_l1_bound(w: WindowFamily) -> float:
    """``max_k ||box_k||_{L^1 -> L^1}`` on the grid (exact discrete Young bound)."""
    g = w.grid
    # 1-D kernels are the synthesised windows; the n-D kernel is their tensor product
    norms = [float(np.sum(np.abs(E.sum(axis=1))) * g.dx) for E in w._synth[WINDOW]]
    return max(norms) ** g.n


def check_interpolation(f: Field, case: InterpolationCase, w: WindowFamily | None = None,
                        rtol: float = 1e-10) -> InterpolationVerdict:
    """Evaluate both sides of the inequality for ``f``; pass iff ``lhs <= rhs (1 + rtol)``."""
    w = w or WindowFamily(f.grid)
    tail = lattice_tail_sum(f.grid.n)
    C = case.constant(w)
    th = case.theta
    a, b = case.exponents
    if case.variant == M21:
        boxn = w.box_l2_norms(f.fourier())
        leb = l2_norm_fourier(f.grid, f.fourier())
        factor = case.tail_sum(w) ** th
    else:
        boxn = box_lp_norms(f, w, p=1.0)
        leb = lp_norm(f, 1.0)
        factor = (case.tail_sum(w) * box_l1_bound(w)) ** th
    if leb == 0 or not np.any(boxn > 0):
        return InterpolationVerdict(0.0, 0.0, False, math.nan, True, C, factor, tail)
    br = w.brackets
    lhs = float(np.sum(br ** case.s * boxn))
    high = float(np.sum(br ** case.s_plus * boxn))
    rhs = factor * high ** a * leb ** b
    return InterpolationVerdict(lhs, rhs, lhs <= rhs * (1 + rtol), rhs / lhs, False, C, factor, tail)


@dataclass
class InterpolationSuiteReport:
    case: InterpolationCase
    grid: Grid
    seed: int
    band: float
    verdicts: list

    @property
    def violations(self) -> int:
        return sum(1 for v in self.verdicts if not v.degenerate and not v.passed)

    @property
    def min_slack(self) -> float:
        return min((v.slack for v in self.verdicts if not v.degenerate), default=math.nan)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(_header({"probe": "interpolation", "variant": self.case.variant, "s": self.case.s,
                           "eps": self.case.eps, "theta": self.case.theta, "s_plus": self.case.s_plus,
                           "n": self.grid.n, "N": self.grid.N, "L": self.grid.L,
                           "seed": self.seed, "band": self.band}))
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["sample", "lhs", "rhs", "slack", "passed", "degenerate"])
        for i, v in enumerate(self.verdicts):
            wr.writerow([i, repr(v.lhs), repr(v.rhs), repr(v.slack), int(v.passed), int(v.degenerate)])
        return buf.getvalue()


def interpolation_suite(grid: Grid, case: InterpolationCase, samples: int = 100, seed: int = 0,
                        band: float = 4.0) -> InterpolationSuiteReport:
    """Check ``samples`` seeded random band-limited fields."""
    w = WindowFamily(grid)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        f = to_physical(random_trig_polynomial(grid, band, rng))
        out.append(check_interpolation(f, case, w))
    return InterpolationSuiteReport(case, grid, seed, band, out)


# -- smoothing probe -----------------------------------------------------------

def default_probe_time(L: float, k: int) -> float:
    """``0.75 L / (1 + |k|)``: a wave packet at frequency ``k`` crosses each point once."""
    return 0.75 * L / (1.0 + abs(k))


@dataclass
class SmoothingReport:
    grid: Grid
    k_list: list
    nu_list: list
    t_probe: dict                         # k -> T
    R: np.ndarray                         # [k, nu]
    truncation: np.ndarray                # upper bound on R(T = inf) - R(T)
    oversample: int = 4

    @property
    def weighted(self) -> np.ndarray:
        """``R(k, nu) <k>^{1/2}``."""
        br = np.array([1.0 + abs(k) for k in self.k_list])
        return self.R * np.sqrt(br)[:, None]

    @property
    def c_emp(self) -> np.ndarray:
        """Per-k maximum over nu of ``R <k>^{1/2}``."""
        return self.weighted.max(axis=1)

    def scaling(self) -> dict:
        """``R(2k, nu) / R(k, nu)`` for every pair present in ``k_list``."""
        out = {}
        pos = {k: i for i, k in enumerate(self.k_list)}
        for k, i in pos.items():
            if 2 * k in pos:
                out[k] = self.R[pos[2 * k]] / self.R[i]
        return out

    def trend(self) -> np.ndarray:
        """``R(k, min nu) / R(k, max nu)`` per k."""
        lo = int(np.argmin(self.nu_list))
        hi = int(np.argmax(self.nu_list))
        return self.R[:, lo] / self.R[:, hi]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(_header({"probe": "smoothing", "n": 1, "N": self.grid.N, "L": self.grid.L,
                           "oversample": self.oversample,
                           "t_probe": {str(k): v for k, v in self.t_probe.items()}}))
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "nu", "T_probe", "R", "R_weighted", "truncation"])
        W = self.weighted
        for i, k in enumerate(self.k_list):
            for j, nu in enumerate(self.nu_list):
                wr.writerow([k, repr(nu), repr(self.t_probe[k]), repr(float(self.R[i, j])),
                             repr(float(W[i, j])), repr(float(self.truncation[i, j]))])
        return buf.getvalue()


def time_gram(xi: np.ndarray, nu: float, T: float) -> np.ndarray:
    """``M_ab = int_0^T e^{-(i+nu) xi_a^2 t} conj(e^{-(i+nu) xi_b^2 t}) dt`` in closed form."""
    a = xi[:, None] ** 2
    b = xi[None, :] ** 2
    z = 1j * (a - b) + nu * (a + b)
    small = np.abs(z) * T < 1e-8
    zs = np.where(small, 1.0, z)
    out = -np.expm1(-zs * T) / zs
    # second-order expansion near z = 0
    return np.where(small, T - z * T * T / 2.0, out)


def smoothing_ratio(grid: Grid, coeffs: np.ndarray, k: int, nu: float, T: float,
                    oversample: int = 4) -> tuple:
    """``(R, truncation bound)`` for the 1-D datum with Fourier coefficients ``coeffs``."""
    if grid.n != 1:
        raise ValueError("smoothing probe is one-dimensional")
    if abs(k) < 4:
        raise ValueError(f"|k| = {abs(k)} < 4 is outside the probe's range")
    sig = eta(k, grid.xi)
    idx = np.nonzero(sig)[0]
    xi = grid.xi[idx]
    c = sig[idx] * coeffs[idx]
    twoL = 2.0 * grid.L
    base = math.sqrt(float(np.sum(np.abs(c) ** 2)) / twoL)
    if base == 0:
        raise ValueError(f"datum has no content in box {k}")
    M = time_gram(xi, nu, T)
    x = -grid.L + np.arange(grid.N * oversample) * (grid.dx / oversample)
    V = c[None, :] * np.exp(1j * np.outer(x, xi))
    intens = np.real(np.einsum("xa,ab,xb->x", V, M, np.conj(V))) / twoL ** 2
    peak = float(max(intens.max(), 0.0))
    R = math.sqrt(peak) / base
    if nu > 0:
        xmin = float(np.abs(xi).min())
        tail = (np.sum(np.abs(c)) / twoL) ** 2 * math.exp(-2 * nu * xmin ** 2 * T) / (2 * nu * xmin ** 2)
        trunc = math.sqrt(peak + tail) / base - R
    else:
        trunc = math.inf
    return R, trunc


def smoothing_probe(k_list: Sequence[int], nu_list: Sequence[float], grid: Grid,
                    t_window: float | Callable[[int], float] | None = None,
                    datum: np.ndarray | None = None, oversample: int = 4) -> SmoothingReport:
    """Table of ``R(k, nu) = ||G_nu(t) box_k phi||_{L^inf_x L^2_t[0,T]} / ||box_k phi||_2``.

    ``datum`` holds Fourier coefficients of ``phi``; the default is the flat
    spectrum (a lattice delta at ``x = 0``).  ``t_window`` is a fixed ``T``
    or a function of ``k``; the default is :func:`default_probe_time`.
    """
    k_list = [int(k) for k in k_list]
    for k in k_list:
        if abs(k) < 4:
            raise ValueError(f"|k| = {abs(k)} < 4 is outside the probe's range")
    for nu in nu_list:
        if not 0.0 <= nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {nu}")
    if t_window is None:
        tfun = lambda k: default_probe_time(grid.L, k)
    elif callable(t_window):
        tfun = t_window
    else:
        tfun = lambda k: float(t_window)
    coeffs = np.ones(grid.N, dtype=np.complex128) if datum is None else np.asarray(datum)
    R = np.zeros((len(k_list), len(nu_list)))
    tr = np.zeros_like(R)
    tp = {}
    for i, k in enumerate(k_list):
        T = tp[k] = float(tfun(k))
        for j, nu in enumerate(nu_list):
            R[i, j], tr[i, j] = smoothing_ratio(grid, coeffs, k, float(nu), T, oversample)
    return SmoothingReport(grid, k_list, [float(v) for v in nu_list], tp, R, tr, oversample)


# -- kernel probe --------------------------------------------------------------

@dataclass(frozen=True)
class KernelProbeSpec:
    """Sample grid and quadrature controls for :func:`kernel_probe`.

    Lengths (``cutoff``, ``panel``) are in units of the cell's natural scale
    ``a = max(1, sqrt|tau|, sqrt(nu s))``.  ``pv_fraction`` sets the
    principal-value half-width relative to the singular point.
    """

    taus: tuple = (-4.0, -1.0, -0.25, -0.01, 0.0, 0.01, 0.25, 1.0, 4.0)
    zs: tuple = (-4.0, -1.0, -0.25, 0.0, 0.25, 1.0, 4.0)
    nus: tuple = (0.0, 1e-3, 1e-2, 1e-1, 1.0)
    ss: tuple = (0.0, 0.1, 1.0, 10.0, 100.0)
    cutoff: float = 40.0
    nodes: int = 16
    panel: float = 0.25
    pv_fraction: float = 0.5
    levels: int = 40
    tol: float = 1e-6

    def __post_init__(self):
        for name in ("taus", "zs", "nus", "ss"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if any(not 0.0 <= v <= 1.0 for v in self.nus):
            raise ValueError("nu values must lie in [0, 1]")
        if any(v < 0 for v in self.ss):
            raise ValueError("s values must be non-negative")
        if not self.cutoff >= 2.0:
            raise ValueError("cutoff must be at least 2 (scale units)")
        if self.nodes < 2 or not self.panel > 0 or not 0 < self.pv_fraction < 1 or self.levels < 1:
            raise ValueError("invalid quadrature controls")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def refined(self, nodes: int = 1, cutoff: int = 1) -> "KernelProbeSpec":
        return replace(self, nodes=self.nodes * nodes, cutoff=self.cutoff * cutoff)


def _j3(x: float) -> float:
    """``int_x^inf sin(u) / u^3 du`` for ``x > 0``."""
    si, _ = sici(x)
    return math.sin(x) / (2 * x * x) + math.cos(x) / (2 * x) - 0.5 * (math.pi / 2 - si)


def _graded(a: float, b: float, levels: int, toward_a: bool = True) -> list:
    """Geometric panels on ``[a, b]`` refining toward ``a``."""
    h = b - a
    pts = [a + h * 2.0 ** -j for j in range(levels, -1, -1)]
    return [a] + pts if toward_a else pts


def _uniform(a: float, b: float, h: float) -> list:
    m = max(1, int(math.ceil((b - a) / h)))
    return list(np.linspace(a, b, m + 1))


def _panel_nodes(breaks: Sequence[float], q: int) -> tuple:
    x0, w0 = roots_legendre(q)
    br = np.asarray(breaks, dtype=float)
    lo, hi = br[:-1], br[1:]
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    return (mid + half * x0).ravel(), (half * w0).ravel()


def kernel_value(tau: float, z: float, nu: float, s: float, spec: KernelProbeSpec = KernelProbeSpec()) -> complex:
    """``K(tau, z)`` for one parameter cell.

    With ``c0 = 1 / (1 - i nu)`` and ``A = i nu s - tau``,
    ``xi / D = c0 / xi + A c0 / (xi D)`` for ``D = tau + xi^2 - i nu (xi^2 + s)``,
    so ``K = 2i [c0 (pi/2) sgn z + int_0^inf sin(z xi) A c0 / (xi D) dxi]``.
    The remaining integral is smooth except near ``xi0 = sqrt(-tau)``, where
    a symmetric pairing removes the odd singular part.  Beyond the cutoff the
    leading term ``A c0^2 / xi^3`` is integrated exactly and the remainder is
    bounded; a bound above ``spec.tol`` raises :class:`ProbeConfigError`.
    """
    if z == 0:
        return 0j
    c0 = 1.0 / (1.0 - 1j * nu)
    A = 1j * nu * s - tau
    lead = 2j * c0 * (math.pi / 2) * math.copysign(1.0, z)
    if A == 0:
        return lead
    scale = max(1.0, math.sqrt(abs(tau)), math.sqrt(nu * s))
    Xi = spec.cutoff * scale
    q = abs(A * c0) / Xi ** 2
    bound = abs(A) ** 2 * abs(c0) ** 3 / (4 * Xi ** 4 * (1 - q)) if q < 1 else math.inf
    if bound > spec.tol:
        raise ProbeConfigError(f"tail bound {bound:.3g} exceeds tol {spec.tol:.3g} at tau={tau}, "
                               f"nu={nu}, s={s}; raise the cutoff")
    h = min(spec.panel * scale, 1.0 / abs(z))

    def g(x, D=None):
        if D is None:
            D = tau + x * x - 1j * nu * (x * x + s)
        return A * c0 * z * np.sinc(z * x / math.pi) / D

    total = 0j
    if tau < 0:
        x0 = math.sqrt(-tau)
        hw = spec.pv_fraction * x0
        left = _graded(0.0, min(h, x0 - hw), spec.levels)
        if x0 - hw > h:
            left = left + _uniform(h, x0 - hw, h)[1:]
        u = _graded(0.0, hw, spec.levels)
        right = _uniform(x0 + hw, Xi, h)
        for br in (left, right):
            xs, ws = _panel_nodes(br, spec.nodes)
            total += np.sum(ws * g(xs))
        us, ws = _panel_nodes(u, spec.nodes)
        # D(x0 +- u) built from u so the pole's cancellation survives rounding
        base = -1j * nu * (x0 * x0 + s)
        dp = base + (2 * x0 * us + us * us) * (1 - 1j * nu)
        dm = base + (-2 * x0 * us + us * us) * (1 - 1j * nu)
        total += np.sum(ws * (g(x0 + us, dp) + g(x0 - us, dm)))
    else:
        br = _graded(0.0, h, spec.levels) + _uniform(h, Xi, h)[1:]
        xs, ws = _panel_nodes(br, spec.nodes)
        total += np.sum(ws * g(xs))
    az = abs(z)
    total += math.copysign(1.0, z) * A * c0 * c0 * az * az * _j3(az * Xi)
    return lead + 2j * total


@dataclass
class KernelReport:
    spec: KernelProbeSpec
    values: np.ndarray                    # [tau, z, nu, s] complex

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(_header({"probe": "kernel", **_spec_dict(self.spec)}))
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tau", "z", "nu", "s", "re_K", "im_K", "abs_K"])
        sp = self.spec
        for idx in np.ndindex(*self.values.shape):
            v = self.values[idx]
            wr.writerow([repr(sp.taus[idx[0]]), repr(sp.zs[idx[1]]), repr(sp.nus[idx[2]]),
                         repr(sp.ss[idx[3]]), repr(v.real), repr(v.imag), repr(abs(v))])
        return buf.getvalue()


@dataclass
class KernelStability:
    base: KernelReport
    nodes_doubled: KernelReport
    cutoff_doubled: KernelReport

    @property
    def changes(self) -> dict:
        m = self.base.max_abs
        return {"nodes": abs(self.nodes_doubled.max_abs - m) / m,
                "cutoff": abs(self.cutoff_doubled.max_abs - m) / m}

    def stable(self, rel: float = 0.2) -> bool:
        fin = self.base.finite and self.nodes_doubled.finite and self.cutoff_doubled.finite
        return fin and all(v < rel for v in self.changes.values())


def kernel_probe(spec: KernelProbeSpec = KernelProbeSpec()) -> KernelReport:
    """``K`` on the full ``(tau, z, nu, s)`` sample grid."""
    shape = (len(spec.taus), len(spec.zs), len(spec.nus), len(spec.ss))
    vals = np.zeros(shape, dtype=np.complex128)
    for idx in np.ndindex(*shape):
        vals[idx] = kernel_value(spec.taus[idx[0]], spec.zs[idx[1]], spec.nus[idx[2]],
                                 spec.ss[idx[3]], spec)
    return KernelReport(spec, vals)


def kernel_stability(spec: KernelProbeSpec = KernelProbeSpec()) -> KernelStability:
    """Base run plus doubled node count and doubled cutoff."""
    return KernelStability(kernel_probe(spec), kernel_probe(spec.refined(nodes=2)),
                           kernel_probe(spec.refined(cutoff=2)))


# -- reporting -----------------------------------------------------------------

def _spec_dict(spec) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()}


def _header(meta: dict) -> str:
    """Parameters echoed as ``# key: value`` comment lines."""
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())


__all__ = [
    "InterpolationCase", "InterpolationVerdict", "check_interpolation", "interpolation_suite",
    "InterpolationSuiteReport", "box_l1_bound", "lattice_tail_sum", "SmoothingReport",
    "smoothing_probe", "smoothing_ratio", "time_gram", "default_probe_time", "KernelProbeSpec",
    "KernelReport", "KernelStability", "kernel_value", "kernel_probe", "kernel_stability",
    "ProbeConfigError", "M21", "M11",
]
