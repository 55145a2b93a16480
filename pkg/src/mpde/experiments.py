"""Inviscid-limit experiments: nu-sweeps, rate fits, working-norm tracking."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .decomposition import WINDOW, WindowFamily
from .grid import Field, Grid, derivative_multiplier, l2_norm_fourier, time_weight
from .initial import InitialRecipe
from .models import ModelParams
from .solver import BLOWUP, COMPLETED, SolverConfig, Trajectory, solve

log = logging.getLogger(__name__)

NORMS = ("l2", "m21", "m11", "l1")
CSV_HEADER = ["nu", "T", "err_l2", "err_m21", "err_m11", "err_l1"]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """One nu-sweep.  The reference ``nu = 0`` run is always added."""

    params: ModelParams
    nus: tuple
    grid: Grid
    initial: InitialRecipe = InitialRecipe()
    solver: SolverConfig = SolverConfig()
    norms: tuple = ("l2", "m21")
    workers: int = 1
    box_rtol: float = 1e-14

    def __post_init__(self):
        nus = tuple(float(v) for v in self.nus)
        object.__setattr__(self, "nus", nus)
        object.__setattr__(self, "norms", tuple(self.norms))
        if not nus:
            raise ValueError("empty nu list")
        if any(not 0.0 < v <= 1.0 for v in nus):
            raise ValueError(f"every swept nu must lie in (0, 1], got {nus}")
        if any(a <= b for a, b in zip(nus, nus[1:])):
            raise ValueError("nu list must be strictly descending")
        bad = [n for n in self.norms if n not in NORMS]
        if bad:
            raise ValueError(f"unknown norms {bad}; expected a subset of {NORMS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list                       # dicts keyed by CSV_HEADER, descending nu, nu = 0 last
    endpoint: list                   # same layout, errors at the final stamp only
    fits: dict                       # norm -> (slope, intercept, residual)
    status: str = COMPLETED
    failed_nu: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.status != COMPLETED

    def slope(self, norm: str = "l2") -> float:
        return self.fits[norm][0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.aborted:
            buf.write(f"# status: {self.status} (partial results, failed nu={self.failed_nu!r})\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in self.rows:
            wr.writerow([_fmt(r[h]) for h in CSV_HEADER])
        return buf.getvalue()

    def summary(self) -> dict:
        sp = self.spec
        return {
            "status": self.status,
            "failed_nu": self.failed_nu,
            "fits": {k: {"slope": v[0], "intercept": v[1], "residual": v[2]} for k, v in self.fits.items()},
            "config": {
                "params": _jsonable(asdict(sp.params)),
                "nus": list(sp.nus),
                "grid": {"n": sp.grid.n, "N": sp.grid.N, "L": sp.grid.L},
                "initial": asdict(sp.initial),
                "solver": asdict(sp.solver),
                "norms": list(sp.norms),
            },
            "seed": sp.initial.seed,
            "meta": self.meta,
        }

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "sweep.csv").write_text(self.to_csv())
        (d / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return d


def _fmt(v) -> str:
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# -- error measurement ---------------------------------------------------------

def difference_norms(grid: Grid, d: np.ndarray, norms: Sequence[str], w: WindowFamily,
                     rtol: float = 1e-14) -> dict:
    """Norms of the field with Fourier coefficients ``d``; modulation norms use s = 0 windows."""
    out = {}
    if "l2" in norms:
        out["l2"] = l2_norm_fourier(grid, d)
    if "m21" in norms:
        out["m21"] = float(w.box_l2_norms(d).sum())
    if "m11" in norms:
        tot = 0.0
        for _, vals in w.boxes(d, WINDOW, rtol=rtol):
            tot += float(np.sum(np.abs(vals))) * grid.cell
        out["m11"] = tot
    if "l1" in norms:
        out["l1"] = float(np.sum(np.abs(grid.inverse(d)))) * grid.cell
    return out


def trajectory_errors(u: Trajectory, v: Trajectory, norms: Sequence[str], w: WindowFamily,
                      rtol: float = 1e-14) -> tuple:
    """``(sup over stamps, final stamp)`` error dicts of ``u - v``."""
    if len(u) != len(v) or not np.allclose(u.times, v.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories have different stamps")
    sup = {n: 0.0 for n in norms}
    last = {}
    for a, b in zip(u.snapshots, v.snapshots):
        last = difference_norms(u.grid, a.fourier() - b.fourier(), norms, w, rtol)
        for n in norms:
            sup[n] = max(sup[n], last[n])
    return sup, last


def _run_one(args):
    nu, params, u0, cfg, ref, norms, rtol = args
    traj = solve(u0, params.with_nu(nu), cfg)
    if traj.status != COMPLETED:
        return nu, traj.status, None, None
    w = WindowFamily(u0.grid)
    sup, last = trajectory_errors(traj, ref, norms, w, rtol)
    return nu, COMPLETED, sup, last


def _row(nu: float, T: float, errs: dict | None) -> dict:
    row = {"nu": nu, "T": T}
    for n in NORMS:
        row[f"err_{n}"] = (errs or {}).get(n, math.nan)
    return row


def run_sweep(spec: SweepSpec, output=None) -> SweepResult:
    """Reference run at ``nu = 0`` followed by one run per swept ``nu``.

    Errors are sup over snapshot stamps of ``||u_nu(t) - v(t)||``.  A run
    ending in blowup stops the sweep; rows completed so far are kept and the
    result is flagged.  With ``output`` set, CSV and summary are written.
    """
    grid = spec.grid
    u0 = spec.initial.build(grid)
    cfg = spec.solver
    T = cfg.T
    meta = {"python": platform.python_version(), "numpy": np.__version__,
            "u0_l2": l2_norm_fourier(grid, u0.fourier())}
    ref = solve(u0, spec.params.with_nu(0.0), cfg)
    rows, endpoint, status, failed = [], [], COMPLETED, None
    if ref.status != COMPLETED:
        status, failed = ref.status, 0.0
    else:
        jobs = [(nu, spec.params, u0, cfg, ref, spec.norms, spec.box_rtol) for nu in spec.nus]
        if spec.workers > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = []
            for job in jobs:
                results.append(_run_one(job))
                if results[-1][1] != COMPLETED:
                    break
        for nu, st, sup, last in results:
            if st != COMPLETED:
                status, failed = (BLOWUP if st == BLOWUP else st), nu
                log.warning("sweep aborted: run at nu=%g ended with %s", nu, st)
                break
            rows.append(_row(nu, T, sup))
            endpoint.append(_row(nu, T, last))
        if status == COMPLETED:
            zero = {n: 0.0 for n in spec.norms}
            rows.append(_row(0.0, T, zero))
            endpoint.append(_row(0.0, T, zero))
    fits = {}
    for n in spec.norms:
        pts = [(r["nu"], r[f"err_{n}"]) for r in rows]
        try:
            fits[n] = fit_rate(pts)
        except FitError:
            fits[n] = (math.nan, math.nan, math.nan)
    res = SweepResult(spec, rows, endpoint, fits, status, failed, meta)
    if output is not None:
        res.write(output)
    return res


def fit_rate(rows: Iterable) -> tuple:
    """OLS fit of ``log err = slope log nu + intercept``; returns (slope, intercept, rms residual).

    Rows with nonpositive ``nu`` or error are dropped; at least four must remain.
    """
    pts = [(float(a), float(b)) for a, b in rows]
    pts = [(a, b) for a, b in pts if a > 0 and b > 0 and math.isfinite(b)]
    if len(pts) < 4:
        raise FitError(f"need at least 4 positive points, have {len(pts)}")
    x = np.log([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    (slope, intercept), *_ = np.linalg.lstsq(np.vstack([x, np.ones_like(x)]).T, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


def linear_oracle_error(u0: Field, nu: float, times: Sequence[float]) -> float:
    """``sup_t ||(exp(-nu t |xi|^2) - 1) F u0||_2`` for the linear equation."""
    g = u0.grid
    c = u0.fourier()
    xs = g.xi_sq()
    return max(l2_norm_fourier(g, np.expm1(-nu * t * xs) * c) for t in times)


# -- working norms -------------------------------------------------------------

@dataclass
class WorkingNormReport:
    s: float
    window: float
    times: np.ndarray
    rho3_l2: np.ndarray              # per stamp: sum_k <k>^{s-3/2} ||box_k u||_2
    blocks: list                     # block start times
    rho1: np.ndarray                 # per block, summed over u and its first derivatives
    rho2: np.ndarray
    rho3: np.ndarray
    factor: float = 3.0

    @property
    def total(self) -> np.ndarray:
        return self.rho1 + self.rho2 + self.rho3

    def ratios(self) -> dict:
        """Maximum of each surrogate over blocks relative to its first block."""
        out = {}
        for name, v in (("rho1", self.rho1), ("rho2", self.rho2), ("rho3", self.rho3), ("X", self.total)):
            out[name] = float(v.max() / v[0]) if v.size and v[0] > 0 else 0.0
        return out

    @property
    def bounded(self) -> bool:
        return all(r <= self.factor for r in self.ratios().values())


def track_working_norms(traj: Trajectory, s: float = 0.0, window: float = 1.0,
                        factor: float = 3.0, rtol: float = 1e-12) -> WorkingNormReport:
    """Discrete surrogates of the working norms on consecutive time blocks.

    For ``F`` ranging over ``u`` and ``d_j u`` (``u`` counted once per axis),
    with ``B = box_k F`` and ``t`` in one block of length ``window``:

    * ``rho1``: ``sum_i sum_{|k_i| > 4} <k_i>^{s-1/2} sup_{x_i} ||B||_{L^2_t L^2_{x'}}``
    * ``rho2``: ``sum_i sum_k <k_i>^{s} ||B||_{L^2_{x_i} L^inf_{x', t}}``
    * ``rho3``: ``sum_k <k>^{s-3/2} (sup_t ||B||_2 + ||B||_{L^3_t L^6_x})``

    ``x'`` denotes the remaining spatial axes.  Blocks are half-open and
    only complete blocks are reported.  Boxes with negligible Fourier mass
    are skipped.
    """
    g = traj.grid
    n = g.n
    times = traj.times
    w = WindowFamily(g)
    br = w.brackets
    weight3 = br ** (s - 1.5)
    rho3_l2 = np.array([float(np.sum(weight3 * w.box_l2_norms(f.fourier()))) for f in traj.snapshots])
    if times.size < 2:
        raise ValueError("need at least two stamps")
    dt = time_weight(times)
    per = int(round(window / dt))
    if per < 1 or abs(per * dt - window) > 1e-9 * window:
        raise ValueError(f"window {window} is not a multiple of the stamp spacing {dt}")
    nblocks = (times.size - 1) // per
    if nblocks < 1:
        raise ValueError("trajectory shorter than one window")
    ddx = [derivative_multiplier(g, i, 1) for i in range(n)]
    rho1 = np.zeros(nblocks)
    rho2 = np.zeros(nblocks)
    rho3 = np.zeros(nblocks)
    kb = w.k1.astype(float)
    kw = 1.0 + np.abs(kb)
    for b in range(nblocks):
        stamps = range(b * per, (b + 1) * per)
        acc = {}
        for j in stamps:
            c = traj.snapshots[j].fourier()
            fields = [(c, n)]
            fields += [(c * d, 1) for d in ddx]
            for fi, (coeffs, mult) in enumerate(fields):
                for k, B in w.boxes(coeffs, WINDOW, rtol=rtol):
                    key = (fi, k)
                    a = acc.get(key)
                    if a is None:
                        a = acc[key] = {"mult": mult, "s1": [np.zeros(g.N) for _ in range(n)],
                                        "m2": [np.zeros(g.N) for _ in range(n)], "l2": 0.0, "l6": 0.0}
                    A2 = np.abs(B) ** 2
                    for i in range(n):
                        other = tuple(ax for ax in range(n) if ax != i)
                        if other:
                            a["s1"][i] += dt * A2.sum(axis=other) * g.dx ** (n - 1)
                            a["m2"][i] = np.maximum(a["m2"][i], A2.max(axis=other))
                        else:
                            a["s1"][i] += dt * A2
                            a["m2"][i] = np.maximum(a["m2"][i], A2)
                    a["l2"] = max(a["l2"], math.sqrt(float(A2.sum()) * g.cell))
                    a["l6"] += dt * (float(np.sum(A2 ** 3)) * g.cell) ** 0.5
        r1 = r2 = r3 = 0.0
        for (fi, k), a in acc.items():
            mult = a["mult"]
            kk = [ki + w.kmax for ki in k]
            for i in range(n):
                if abs(k[i]) > 4:
                    r1 += mult * kw[kk[i]] ** (s - 0.5) * math.sqrt(float(a["s1"][i].max()))
                r2 += mult * kw[kk[i]] ** s * math.sqrt(float(a["m2"][i].sum()) * g.dx)
            r3 += mult * weight3[tuple(kk)] * (a["l2"] + a["l6"] ** (1.0 / 3.0))
        rho1[b], rho2[b], rho3[b] = r1, r2, r3
    blocks = [float(times[b * per]) for b in range(nblocks)]
    return WorkingNormReport(s, window, times, rho3_l2, blocks, rho1, rho2, rho3, factor)


__all__ = [
    "SweepSpec", "SweepResult", "run_sweep", "fit_rate", "FitError", "linear_oracle_error",
    "difference_norms", "trajectory_errors", "WorkingNormReport", "track_working_norms",
    "NORMS", "CSV_HEADER",
]
