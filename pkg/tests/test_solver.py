import math

import numpy as np
import pytest

from mpde.decomposition import NormSpec, WindowFamily, modulation_norm
from mpde.grid import Field, Grid, l2_norm_fourier, lp_norm
from mpde.models import ModelParams
from mpde.propagators import apply_flow
from mpde.solver import (BLOWUP, COMPLETED, DIVERGED, PICARD, SolverConfig, Trajectory, solve, step_strang,
                         sup_l2_difference)

from conftest import random_field


@pytest.fixture(scope="module")
def g1():
    return Grid(1, 128, 8 * math.pi)


def gaussian(g, amp):
    return Field.from_function(g, lambda *x: amp * np.exp(-sum(xi * xi for xi in x) / 2))


KINDS = [
    ModelParams("quadratic", lam=1.0),
    ModelParams("dcgl_cubic", 0.1, lambda1=1.0, lambda2=1.0, alpha=1.0),
    ModelParams("dnls_cubic", lambda1=1.0, lambda2=1j, alpha=1j),
    ModelParams("cgl_power", 0.1, alpha=1.0, delta=2),
]


def test_config_validation():
    for bad in (dict(dt=0.0), dict(T=-1.0), dict(scheme="rk4"), dict(dt=0.3, T=1.0),
                dict(blowup_threshold=0.0), dict(snapshot_stride=0), dict(picard_tol=0.0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    assert SolverConfig(dt=0.1, T=1.0).steps == 10


def test_linear_step_is_flow(rng, g1):
    u = random_field(g1, rng)
    p = ModelParams("dcgl_cubic", 0.2)
    a = step_strang(u, 0.05, p).values
    b = apply_flow(u, 0.05, 0.2).values
    assert np.array_equal(a, b) or np.abs(a - b).max() <= 1e-14
    assert step_strang(u, 0.0, KINDS[1]) is u


def test_linear_solve_matches_flow(rng, g1):
    u0 = random_field(g1, rng)
    tr = solve(u0, ModelParams("dcgl_cubic", 0.05), SolverConfig(dt=0.01, T=1.0, snapshot_stride=20))
    assert tr.status == COMPLETED and len(tr) == 6
    for t, f in zip(tr.times, tr.snapshots):
        exact = apply_flow(u0, t, 0.05).fourier()
        assert np.abs(f.fourier() - exact).max() <= 1e-12 * np.abs(u0.fourier()).max()


def test_schrodinger_l2_conservation(rng, g1):
    u0 = random_field(g1, rng)
    tr = solve(u0, ModelParams("dnls_cubic"), SolverConfig(dt=0.01, T=10.0, snapshot_stride=50))
    n0 = lp_norm(u0, 2)
    assert max(abs(lp_norm(f, 2) / n0 - 1) for f in tr.snapshots) <= 1e-12


def _endpoint(u0, p, dt, T):
    return solve(u0, p, SolverConfig(dt=dt, T=T, snapshot_stride=int(round(T / dt)))).snapshots[-1].fourier()


def test_strang_second_order(g1):
    u0 = gaussian(g1, 0.5)
    p = ModelParams("dcgl_cubic", 0.05, lambda1=1.0, lambda2=0.5j, alpha=1 - 1j)
    ref = _endpoint(u0, p, 0.0025, 1.0)
    errs = [l2_norm_fourier(g1, _endpoint(u0, p, dt, 1.0) - ref) for dt in (0.04, 0.02)]
    assert 3.4 <= errs[0] / errs[1] <= 4.6
    a, b, c = (_endpoint(u0, p, dt, 1.0) for dt in (0.04, 0.02, 0.01))
    order = math.log2(l2_norm_fourier(g1, a - b) / l2_norm_fourier(g1, b - c))
    assert order >= 1.9


def test_determinism(rng, g1):
    u0 = random_field(g1, rng, scale=0.2)
    c = SolverConfig(dt=0.01, T=0.5, snapshot_stride=10)
    a, b = solve(u0, KINDS[1], c), solve(u0, KINDS[1], c)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a.snapshots, b.snapshots))


def test_long_run_bounded():
    g = Grid(1, 128, 8 * math.pi)
    u0 = gaussian(g, 0.05)
    c = SolverConfig(dt=0.01, T=10.0, snapshot_stride=100)
    tr = solve(u0, KINDS[1], c)
    assert tr.status == COMPLETED
    assert max(lp_norm(f, 2) for f in tr.snapshots) <= c.threshold(lp_norm(u0, 2))
    w = WindowFamily(g)
    m = [modulation_norm(f, NormSpec("M21", 0.0), w) for f in tr.snapshots]
    assert max(m) <= 3 * m[0]


def test_blowup_status(g1):
    u0 = gaussian(g1, 30.0)
    tr = solve(u0, ModelParams("cgl_power", 0.0, alpha=5.0), SolverConfig(dt=0.01, T=1.0, snapshot_stride=1))
    assert tr.status == BLOWUP
    t_last, f_last = tr.last_finite
    assert np.all(np.isfinite(f_last.values)) and t_last < 1.0


def test_picard_linear_one_iteration(rng, g1):
    u0 = random_field(g1, rng)
    tr = solve(u0, ModelParams("dcgl_cubic", 0.1), SolverConfig(dt=0.01, T=0.5, scheme=PICARD))
    assert tr.status == COMPLETED and tr.info["iterations"] == 1
    for t, f in zip(tr.times, tr.snapshots):
        assert np.abs(f.fourier() - apply_flow(u0, t, 0.1).fourier()).max() <= 1e-12 * np.abs(u0.fourier()).max()


@pytest.mark.parametrize("p", KINDS, ids=[k.kind for k in KINDS])
def test_picard_matches_strang(g1, p):
    u0 = gaussian(g1, 0.1)
    a = solve(u0, p, SolverConfig(dt=0.01, T=0.5, snapshot_stride=5))
    b = solve(u0, p, SolverConfig(dt=0.01, T=0.5, snapshot_stride=5, scheme=PICARD))
    assert b.status == COMPLETED
    assert sup_l2_difference(a, b) <= max(1e-6, 10 * 0.01 ** 2)
    assert b.info["max_contraction"] <= 0.5


def test_picard_divergence(g1):
    u0 = gaussian(g1, 1.0)
    u0 = u0 * (10.0 / lp_norm(u0, 2))
    tr = solve(u0, ModelParams("quadratic", lam=1.0), SolverConfig(dt=0.01, T=1.0, scheme=PICARD))
    assert tr.status == DIVERGED


def test_stride_must_divide(g1):
    with pytest.raises(ValueError):
        solve(Field.zeros(g1), KINDS[0], SolverConfig(dt=0.1, T=1.0, snapshot_stride=3))


def test_trajectory_invariants(g1):
    with pytest.raises(ValueError):
        Trajectory(g1, [0.0, 0.1], [Field.zeros(g1)])
    with pytest.raises(ValueError):
        Trajectory(g1, [0.0, 0.0], [Field.zeros(g1)] * 2)


def test_save_load(tmp_path, rng, g1):
    u0 = random_field(g1, rng, scale=0.1)
    tr = solve(u0, KINDS[0], SolverConfig(dt=0.05, T=0.5, snapshot_stride=2))
    d = tr.save(tmp_path / "traj", {"seed": 3}, m21=lambda f: 1.0)
    back = Trajectory.load(d)
    assert back.status == tr.status and np.array_equal(back.times, tr.times)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(back.snapshots, tr.snapshots))
    header = (d / "index.csv").read_text().splitlines()[0]
    assert header == "stamp_index,time,file,l2_norm,m21_norm"
