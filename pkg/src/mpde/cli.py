"""``mpde`` command line: simulate, sweep, verify, norms.

Exit status: 0 success, 1 an assertion on the results failed, 2 bad
configuration or filesystem precondition, 3 numerical failure (blowup or
Picard divergence).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from .config import COMMANDS, ConfigError, RunConfig, parse_config, parse_space

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("mpde")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: $MPDE_OUT or ./mpde_out)")
    common.add_argument("--workers", type=int, metavar="N", help="worker processes for sweeps")
    common.add_argument("--seed", type=int, metavar="S", help="seed for random data and probes")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override section.key=value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="mpde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "integrate one trajectory and save snapshots",
        "sweep": "nu-sweep against the nu = 0 reference and fit the rate",
        "verify": "interpolation, smoothing and kernel probes",
        "norms": "norm table for saved snapshots",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def load_config(args) -> RunConfig:
    text = ""
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"])
    overrides = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"sweep.workers={args.workers}")
    rc = parse_config(text, args.command, overrides)
    rc.config_path = args.config
    rc.workers = args.workers
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError([f"--seed {args.seed}: value must be >= 0"])
        rc.values["initial"]["seed"] = args.seed
        rc.values["verify"]["seed"] = args.seed
        rc.seed, rc.seed_source = args.seed, "flag"
    else:
        rc.seed = rc.values["initial"]["seed"]
        rc.seed_source = "config" if ("initial", "seed") in rc.explicit else "default"
    rc.out = args.out or os.environ.get("MPDE_OUT") or "mpde_out"
    return rc


def prepare_out(path: str) -> Path:
    d = Path(path)
    if not d.parent.exists():
        raise UsageError(f"parent of output directory {d} does not exist")
    try:
        d.mkdir(exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {d}: {exc}")
    return d


# -- builders ------------------------------------------------------------------

def make_grid(v: dict):
    from .grid import Grid
    return Grid(v["n"], v["N"], v["L"])


def make_params(v: dict):
    from .models import ModelParams
    return ModelParams(kind=v["kind"], nu=v["nu"], lambda1=v["lambda1"], lambda2=v["lambda2"],
                       lam=v["lam"] if v["kind"] == "quadratic" else (0j,),
                       alpha=v["alpha"], delta=v["delta"])


def make_solver(v: dict):
    from .solver import SolverConfig
    return SolverConfig(**v)


def make_initial(v: dict):
    from .initial import InitialRecipe
    return InitialRecipe(**v)


def _meta(rc: RunConfig) -> dict:
    return {"command": rc.command, "seed": rc.seed, "seed_source": rc.seed_source,
            "config_path": rc.config_path, "overrides": list(rc.overrides)}


# -- commands ------------------------------------------------------------------

def cmd_simulate(rc: RunConfig, out: Path) -> int:
    from .decomposition import NormSpec, WindowFamily, modulation_norm
    from .solver import COMPLETED, solve
    grid = make_grid(rc["grid"])
    u0 = make_initial(rc["initial"]).build(grid)
    params = make_params(rc["model"])
    w = WindowFamily(grid)
    m21 = lambda f: modulation_norm(f, NormSpec("M21", 0.0), w)
    t0 = time.perf_counter()
    traj = solve(u0, params, make_solver(rc["solver"]))
    info = {k: v for k, v in traj.info.items()}
    traj.save(out / "trajectory", {"n": grid.n, "N": grid.N, "L": grid.L, "seed": rc.seed}, m21=m21)
    summary = {**_meta(rc), "status": traj.status, "stamps": len(traj),
               "final_time": float(traj.times[-1]), "elapsed_s": time.perf_counter() - t0}
    if traj.last_finite is not None:
        summary["last_finite_time"] = traj.last_finite[0]
    summary["info"] = {k: v for k, v in info.items() if k not in ("differences", "contraction_ratios")}
    _write_json(out / "summary.json", summary)
    log.info("simulate: status %s, %d stamps", traj.status, len(traj))
    return EXIT_OK if traj.status == COMPLETED else EXIT_NUMERIC


def cmd_sweep(rc: RunConfig, out: Path) -> int:
    from .experiments import SweepSpec, run_sweep
    sv = rc["sweep"]
    spec = SweepSpec(make_params({**rc["model"], "nu": 0.0}), sv["nus"], make_grid(rc["grid"]),
                     make_initial(rc["initial"]), make_solver(rc["solver"]), sv["norms"], sv["workers"])
    res = run_sweep(spec)
    res.meta.update(_meta(rc))
    res.write(out)
    if res.aborted:
        log.error("sweep aborted: %s at nu=%s", res.status, res.failed_nu)
        return EXIT_NUMERIC
    code = EXIT_OK
    for norm, (slope, _, resid) in res.fits.items():
        log.info("sweep: %s slope %.4f residual %.4f", norm, slope, resid)
        if sv["expect_slope"] is not None:
            if not (abs(slope - sv["expect_slope"]) <= sv["slope_tol"] and resid < sv["max_residual"]):
                log.error("sweep: %s slope %.4f outside %.3g +- %.3g (residual %.3g)",
                          norm, slope, sv["expect_slope"], sv["slope_tol"], resid)
                code = EXIT_FAIL
    return code


def cmd_verify(rc: RunConfig, out: Path) -> int:
    from .grid import Grid
    from . import verifier as V
    v = rc["verify"]
    summary = {**_meta(rc), "seed": v["seed"], "probes": {}}
    ok = True
    if "interpolation" in v["probes"]:
        res = {}
        for n in v["interp_n"]:
            grid = Grid(n, v["interp_N"], v["interp_L"])
            for variant in (V.M21, V.M11):
                case = V.InterpolationCase(v["interp_s"], v["interp_eps"], variant)
                rep = V.interpolation_suite(grid, case, v["interp_samples"], v["seed"])
                (out / f"interpolation_{variant}_n{n}.csv").write_text(rep.to_csv())
                res[f"{variant}_n{n}"] = {"violations": rep.violations, "min_slack": rep.min_slack}
                ok &= rep.violations == 0
        summary["probes"]["interpolation"] = res
    if "smoothing" in v["probes"]:
        N, L = v["smoothing_N"], v["smoothing_L"]
        configs = {"coarse": (N, L), "refined_N": (2 * N, L), "refined_NL": (2 * N, 2 * L)}
        reps = {}
        for name, (NN, LL) in configs.items():
            reps[name] = V.smoothing_probe(v["smoothing_k"], v["smoothing_nu"], Grid(1, NN, LL))
            (out / f"smoothing_{name}.csv").write_text(reps[name].to_csv())
        base = reps["coarse"].weighted
        growth = max(float((r.weighted / base).max()) - 1.0 for r in reps.values())
        lo, hi = v["scaling_band"]
        ratios = {str(k): list(map(float, r)) for k, r in reps["coarse"].scaling().items()}
        scaled = all(lo <= x <= hi for r in ratios.values() for x in r)
        stable = growth <= v["smoothing_growth"]
        ok &= stable and scaled
        summary["probes"]["smoothing"] = {"c_emp": list(map(float, reps["coarse"].c_emp)),
                                          "max_growth": growth, "scaling": ratios,
                                          "stable": stable, "scaling_ok": scaled}
    if "kernel" in v["probes"]:
        spec = V.KernelProbeSpec(taus=v["kernel_taus"], zs=v["kernel_zs"], nus=v["kernel_nus"],
                                 ss=v["kernel_ss"], cutoff=v["kernel_cutoff"], nodes=v["kernel_nodes"],
                                 tol=v["kernel_tol"])
        st = V.kernel_stability(spec)
        (out / "kernel.csv").write_text(st.base.to_csv())
        stable = st.stable(v["kernel_stability"])
        ok &= stable
        summary["probes"]["kernel"] = {"max_abs": st.base.max_abs, "changes": st.changes, "stable": stable}
    summary["passed"] = bool(ok)
    _write_json(out / "verify_summary.json", summary)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_norms(rc: RunConfig, out: Path) -> int:
    from .decomposition import WindowFamily, norm_rows
    from .io import read_field
    src = rc["norms"]["input"]
    if not src:
        raise UsageError("[norms] input is required")
    path = Path(src)
    if path.is_dir():
        index = path / "index.csv"
        if not index.exists():
            raise UsageError(f"{path} has no index.csv")
        with open(index) as fh:
            items = [(r["file"], path / r["file"]) for r in csv.DictReader(fh)]
    elif path.is_file():
        items = [(path.name, path)]
    else:
        raise UsageError(f"norms input {path} does not exist")
    specs = [parse_space(s) for s in rc["norms"]["spaces"]]
    rows, w = [], None
    for fid, p in items:
        f = read_field(p)
        if w is None or w.grid != f.grid:
            w = WindowFamily(f.grid)
        rows += norm_rows(fid, f, specs, w)
    with open(out / "norms.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["field_id", "space", "s", "value"])
        for fid, space, s, val in rows:
            wr.writerow([fid, space, repr(float(s)), repr(float(val))])
    return EXIT_OK


COMMAND_FUNCS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "verify": cmd_verify, "norms": cmd_norms}


def _write_json(path: Path, obj) -> None:
    def default(o):
        if isinstance(o, complex):
            return [o.real, o.imag]
        if hasattr(o, "item"):
            return o.item()
        raise TypeError(type(o))
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=default, allow_nan=True) + "\n")


def dispatch(rc: RunConfig) -> int:
    """Run ``rc.command`` and return the exit status."""
    try:
        out = prepare_out(rc.out)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    (out / "resolved.cfg").write_text(rc.dump())
    try:
        return COMMAND_FUNCS[rc.command](rc, out)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (FloatingPointError, OverflowError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid run: %s", exc)
        return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = load_config(args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return EXIT_CONFIG
    return dispatch(rc)


if __name__ == "__main__":
    sys.exit(main())
