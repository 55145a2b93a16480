import math

import numpy as np
import pytest

from mpde.grid import Field, Grid, lp_norm
from mpde.initial import InitialRecipe, random_trig_polynomial
from mpde.models import ModelParams
from mpde.solver import BLOWUP, SolverConfig, Trajectory, solve
from mpde.experiments import (CSV_HEADER, FitError, SweepSpec, fit_rate, linear_oracle_error, run_sweep,
                              track_working_norms)

NUS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


@pytest.fixture(scope="module")
def g1():
    return Grid(1, 128, 8 * math.pi)


def test_fit_exact_laws():
    nus = np.logspace(-1, -3, 5)
    s, b, r = fit_rate(zip(nus, 3 * nus))
    assert s == pytest.approx(1.0, abs=1e-12) and b == pytest.approx(math.log(3)) and r < 1e-12
    assert fit_rate(zip(nus, nus ** 2))[0] == pytest.approx(2.0, abs=1e-12)


def test_fit_exclusions():
    nus = list(np.logspace(-1, -3, 5))
    errs = [2 * v for v in nus]
    errs[2] = 0.0
    assert fit_rate(zip(nus, errs))[0] == pytest.approx(1.0, abs=1e-12)
    errs[3] = -1.0
    with pytest.raises(FitError):
        fit_rate(zip(nus, errs))
    assert fit_rate(list(zip(nus, [2 * v for v in nus])) + [(0.0, 0.0)])[0] == pytest.approx(1.0)


def test_initial_recipes(g1):
    r = InitialRecipe("random", amplitude=0.05, seed=3)
    a, b = r.build(g1), r.build(g1)
    assert np.array_equal(a.values, b.values)
    assert lp_norm(a, 2) == pytest.approx(0.05, rel=1e-12)
    gauss = InitialRecipe(amplitude=0.2).build(g1)
    assert gauss.values[g1.N // 2] == pytest.approx(0.2)
    p = random_trig_polynomial(g1, 2.0, np.random.default_rng(0))
    assert np.all(p.values[np.abs(g1.xi) > 2.0] == 0)
    with pytest.raises(ValueError):
        InitialRecipe("box")


def test_spec_validation(g1):
    p = ModelParams("quadratic", lam=1.0)
    for nus in ((), (0.0,), (1.5,), (1e-3, 1e-2), (1e-2, 1e-2)):
        with pytest.raises(ValueError):
            SweepSpec(p, nus, g1)
    with pytest.raises(ValueError):
        SweepSpec(p, NUS, g1, norms=("h1",))


def test_linear_sweep_matches_oracle(g1):
    spec = SweepSpec(ModelParams("dcgl_cubic"), NUS, g1, solver=SolverConfig(dt=0.01, T=1.0, snapshot_stride=10),
                     norms=("l2", "m21", "m11", "l1"))
    res = run_sweep(spec)
    u0 = spec.initial.build(g1)
    times = np.linspace(0, 1, 11)
    for row in res.rows[:-1]:
        assert abs(row["err_l2"] - linear_oracle_error(u0, row["nu"], times)) <= 1e-10 * row["err_l2"] + 1e-16
    last = res.rows[-1]
    assert last["nu"] == 0 and all(last[f"err_{n}"] == 0 for n in ("l2", "m21", "m11", "l1"))
    for n in ("l2", "m21", "m11", "l1"):
        errs = [r[f"err_{n}"] for r in res.rows]
        assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert 0.9 < res.slope("l2") <= 1.0


def test_sweep_csv_reproducible(tmp_path, g1):
    spec = SweepSpec(ModelParams("quadratic", lam=1.0), NUS, g1,
                     solver=SolverConfig(dt=0.02, T=0.5, snapshot_stride=5))
    a = run_sweep(spec, tmp_path / "a")
    b = run_sweep(spec, tmp_path / "b")
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    lines = a.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 7
    assert math.isnan(a.rows[0]["err_m11"])
    par = run_sweep(SweepSpec(spec.params, NUS, g1, solver=spec.solver, workers=2))
    assert par.to_csv() == b.to_csv()


def test_small_data_monotone(g1):
    spec = SweepSpec(ModelParams("quadratic", lam=1.0), NUS, g1,
                     solver=SolverConfig(dt=0.01, T=1.0, snapshot_stride=10))
    res = run_sweep(spec)
    errs = [r["err_l2"] for r in res.rows]
    assert all(a >= b - 1e-10 for a, b in zip(errs, errs[1:]))
    assert abs(res.slope("l2") - 1) <= 0.1 and res.fits["l2"][2] < 0.05


def test_sweep_blowup_flagged(tmp_path, g1):
    spec = SweepSpec(ModelParams("cgl_power", alpha=5.0), (0.1, 0.01), g1, InitialRecipe(amplitude=30.0),
                     SolverConfig(dt=0.01, T=1.0, snapshot_stride=10))
    res = run_sweep(spec, tmp_path)
    assert res.aborted and res.status == BLOWUP
    text = (tmp_path / "sweep.csv").read_text()
    assert text.startswith("# status: blowup")


def test_working_norms_zero(g1):
    z = Field.zeros(g1)
    tr = Trajectory(g1, np.linspace(0, 2, 5), [z] * 5)
    rep = track_working_norms(tr, window=1.0)
    assert np.all(rep.rho1 == 0) and np.all(rep.rho2 == 0) and np.all(rep.rho3 == 0)
    assert np.all(rep.rho3_l2 == 0) and rep.bounded


def test_working_norms_linear_isometry():
    g = Grid(2, 32, 4 * math.pi)
    u0 = InitialRecipe(amplitude=0.1).build(g)
    tr = solve(u0, ModelParams("dnls_cubic"), SolverConfig(dt=0.1, T=2.0, snapshot_stride=2))
    rep = track_working_norms(tr, s=0.0, window=1.0)
    assert np.ptp(rep.rho3_l2) <= 1e-10 * rep.rho3_l2[0]
    assert len(rep.blocks) == 2 and rep.bounded


def test_working_norms_window_errors(g1):
    z = Field.zeros(g1)
    tr = Trajectory(g1, np.linspace(0, 1, 5), [z] * 5)
    with pytest.raises(ValueError):
        track_working_norms(tr, window=0.3)
    with pytest.raises(ValueError):
        track_working_norms(tr, window=2.0)
