"""Time integration: exponential Strang splitting and Picard iteration.

Both schemes solve ``u_t = (nu + i) Laplace u + N(u)`` with the linear part
treated exactly.  Strang splitting wraps an explicit-midpoint nonlinear
substep between two half flows.  Picard iteration applies the Duhamel map
``u -> G_nu(t) u0 + A_nu[N(u)]`` on the whole window with the trapezoid
quadrature of :mod:`mpde.propagators`.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import FOURIER, Field, Grid, l2_norm_fourier, to_physical
from .io import read_field, write_field
from .models import ModelParams, nonlinearity_coeffs
from .propagators import duhamel_coeffs, flow_symbol

log = logging.getLogger(__name__)

STRANG = "strang_etd"
PICARD = "picard"

COMPLETED = "completed"
BLOWUP = "blowup"
DIVERGED = "diverged_picard"


class BlowupError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    T: float = 1.0
    scheme: str = STRANG
    picard_max_iters: int = 50
    picard_tol: float = 1e-12
    blowup_threshold: float | None = None    # None: 1e3 * ||u0||_2
    snapshot_stride: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            raise ValueError(f"T must be non-negative, got {self.T}")
        if self.scheme not in (STRANG, PICARD):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.picard_max_iters < 1 or not self.picard_tol > 0:
            raise ValueError("picard_max_iters >= 1 and picard_tol > 0 required")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def threshold(self, u0_norm: float) -> float:
        if self.blowup_threshold is not None:
            return self.blowup_threshold
        return 1e3 * u0_norm if u0_norm > 0 else math.inf


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    snapshots: list
    status: str = COMPLETED
    info: dict = field(default_factory=dict)
    last_finite: tuple | None = None          # (time, Field) when status is blowup

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.snapshots) != self.times.size:
            raise ValueError("snapshot count does not match stamps")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("stamps must be strictly increasing")

    def __len__(self):
        return len(self.snapshots)

    def coeffs(self) -> np.ndarray:
        return np.stack([s.fourier() for s in self.snapshots])

    def save(self, directory, meta: dict | None = None, m21=None) -> Path:
        """Write snapshots plus ``index.csv`` (stamp_index, time, file, l2_norm, m21_norm)."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = dict(meta or {})
        rows = []
        for j, (t, f) in enumerate(zip(self.times, self.snapshots)):
            name = f"snap_{j:05d}.mpde"
            write_field(d / name, f, {**meta, "time": float(t), "stamp_index": j})
            l2 = l2_norm_fourier(f.grid, f.fourier())
            m = m21(f) if m21 is not None else math.nan
            rows.append((j, repr(float(t)), name, repr(l2), repr(float(m))))
        with open(d / "index.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stamp_index", "time", "file", "l2_norm", "m21_norm"])
            w.writerows(rows)
        (d / "trajectory.json").write_text(json.dumps(
            {"status": self.status, "info": _plain(self.info), **meta}, indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "Trajectory":
        d = Path(directory)
        times, snaps = [], []
        with open(d / "index.csv") as fh:
            for row in csv.DictReader(fh):
                times.append(float(row["time"]))
                snaps.append(read_field(d / row["file"]))
        status = json.loads((d / "trajectory.json").read_text()).get("status", COMPLETED)
        return cls(snaps[0].grid, np.array(times), snaps, status)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _strang_coeffs(grid: Grid, c: np.ndarray, dt: float, p: ModelParams, half: np.ndarray) -> np.ndarray:
    v = half * c
    if not p.is_linear:
        k1 = nonlinearity_coeffs(grid, v, p)
        k2 = nonlinearity_coeffs(grid, v + 0.5 * dt * k1, p)
        v = v + dt * k2
    return half * v


def step_strang(u: Field, dt: float, p: ModelParams) -> Field:
    """One Strang step: half flow, explicit-midpoint nonlinear step, half flow."""
    if dt == 0:
        return u
    half = flow_symbol(u.grid, 0.5 * dt, p.nu)
    c = _strang_coeffs(u.grid, u.fourier(), dt, p, half)
    if not np.all(np.isfinite(c)):
        raise BlowupError("non-finite state after Strang step")
    out = Field(u.grid, c, FOURIER)
    return out if u.representation == FOURIER else to_physical(out)


def solve(u0: Field, p: ModelParams, c: SolverConfig) -> Trajectory:
    """Integrate to ``c.T``; dispatches on ``c.scheme``."""
    if c.scheme == PICARD:
        return solve_picard(u0, p, c)
    grid = u0.grid
    steps = c.steps
    if steps % c.snapshot_stride:
        raise ValueError(f"snapshot_stride={c.snapshot_stride} does not divide {steps} steps")
    coeffs = u0.fourier()
    limit = c.threshold(l2_norm_fourier(grid, coeffs))
    half = flow_symbol(grid, 0.5 * c.dt, p.nu)
    times, snaps = [0.0], [Field(grid, coeffs, FOURIER)]
    status = COMPLETED
    last = None
    for j in range(1, steps + 1):
        new = _strang_coeffs(grid, coeffs, c.dt, p, half)
        norm = l2_norm_fourier(grid, new) if np.all(np.isfinite(new)) else math.inf
        if not norm <= limit:
            status = BLOWUP
            last = ((j - 1) * c.dt, Field(grid, coeffs, FOURIER))
            log.warning("blowup at t=%.6g: ||u||_2=%.3g exceeds %.3g", j * c.dt, norm, limit)
            break
        coeffs = new
        if j % c.snapshot_stride == 0:
            times.append(j * c.dt)
            snaps.append(Field(grid, coeffs, FOURIER))
    return Trajectory(grid, np.array(times), snaps, status,
                      {"scheme": STRANG, "dt": c.dt, "steps": steps}, last)


def solve_picard(u0: Field, p: ModelParams, c: SolverConfig) -> Trajectory:
    """Fixed point of the Duhamel map on ``[0, T]`` by successive substitution.

    Convergence: sup over nodes of ``||u^{m+1} - u^m||_2`` at most
    ``picard_tol`` times the sup norm of the iterate.  Three consecutive
    increases of that difference (or non-finite values, or running out of
    iterations) end the run with status ``diverged_picard``.
    """
    grid = u0.grid
    steps = c.steps
    if steps % c.snapshot_stride:
        raise ValueError(f"snapshot_stride={c.snapshot_stride} does not divide {steps} steps")
    c0 = u0.fourier()
    E = flow_symbol(grid, c.dt, p.nu)
    linear = [c0]
    for _ in range(steps):
        linear.append(E * linear[-1])
    U = list(linear)
    diffs, ratios = [], []
    status = DIVERGED
    growth = 0
    it = 0
    for it in range(1, c.picard_max_iters + 1):
        forcing = [nonlinearity_coeffs(grid, x, p) for x in U]
        A = duhamel_coeffs(grid, forcing, c.dt, p.nu)
        new = [a + b for a, b in zip(linear, A)]
        if not all(np.all(np.isfinite(x)) for x in new):
            break
        d = max(l2_norm_fourier(grid, a - b) for a, b in zip(new, U))
        size = max(l2_norm_fourier(grid, x) for x in new)
        if diffs:
            ratios.append(d / diffs[-1] if diffs[-1] > 0 else 0.0)
            growth = growth + 1 if d > diffs[-1] else 0
        diffs.append(d)
        U = new
        if d <= c.picard_tol * max(size, 1e-300):
            status = COMPLETED
            break
        if growth >= 3:
            break
    stride = c.snapshot_stride
    idx = list(range(0, steps + 1, stride))
    info = {"scheme": PICARD, "dt": c.dt, "iterations": it, "differences": diffs,
            "contraction_ratios": ratios, "max_contraction": max(ratios, default=0.0)}
    return Trajectory(grid, np.array([j * c.dt for j in idx]),
                      [Field(grid, U[j], FOURIER) for j in idx], status, info)


def sup_l2_difference(a: Trajectory, b: Trajectory) -> float:
    """``max_j ||a(t_j) - b(t_j)||_2`` over common stamps."""
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories have different stamps")
    g = a.grid
    return max(l2_norm_fourier(g, x.fourier() - y.fourier()) for x, y in zip(a.snapshots, b.snapshots))


__all__ = [
    "SolverConfig", "Trajectory", "step_strang", "solve", "solve_picard", "sup_l2_difference",
    "BlowupError", "COMPLETED", "BLOWUP", "DIVERGED", "STRANG", "PICARD"
]
