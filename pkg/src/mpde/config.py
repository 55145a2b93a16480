"""Run configuration: a line-oriented ``key = value`` format with ``[section]`` headers.

Grammar::

    file     := line*
    line     := blank | comment | header | entry
    comment  := '#' anything
    header   := '[' name ']'
    entry    := key '=' value        (value may carry a trailing '# comment')

Lists are comma separated.  Complex numbers use Python syntax
(``1``, ``0.5-2j``, ``(1+0j)``).  ``none`` clears an optional value.  Every
key has a default; unknown sections or keys are errors.  All problems in a
file are collected and reported together with their line numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Aggregated configuration problems."""

    def __init__(self, problems: list):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# -- value types ---------------------------------------------------------------

def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _complex(s: str) -> complex:
    return complex(s.replace(" ", ""))


def _list(conv: Callable) -> Callable:
    def parse(s: str) -> tuple:
        parts = [p.strip() for p in s.split(",")]
        if parts == [""]:
            return ()
        return tuple(conv(p) for p in parts)
    return parse


def _optional(conv: Callable) -> Callable:
    def parse(s: str):
        return None if s.strip().lower() == "none" else conv(s)
    return parse


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_complex(z: complex) -> str:
    return repr(complex(z))


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_fmt_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, complex):
        return _fmt_complex(v)
    if isinstance(v, float):
        return _fmt_float(v)
    return str(v)


@dataclass(frozen=True)
class Key:
    default: Any
    parse: Callable
    check: Callable | None = None        # value -> error message or None
    doc: str = ""


def _range(lo, hi, lo_open=False, hi_open=False):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        for x in vals:
            if x is None:
                continue
            bad = (x <= lo if lo_open else x < lo) or (x >= hi if hi_open else x > hi)
            if bad:
                a = "(" if lo_open else "["
                b = ")" if hi_open else "]"
                return f"value {x!r} outside the allowed range {a}{lo}, {hi}{b}"
        return None
    return check


def _choice(*opts):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        for x in vals:
            if x not in opts:
                return f"value {x!r} not one of {', '.join(opts)}"
        return None
    return check


def _even_min(m):
    def check(v):
        if v < m or v % 2:
            return f"value {v} must be an even integer >= {m}"
        return None
    return check


def _descending(v):
    if any(a <= b for a, b in zip(v, v[1:])):
        return "values must be strictly descending"
    return _range(0.0, 1.0, lo_open=True)(v)


_INF = math.inf

SCHEMA: dict = {
    "grid": {
        "n": Key(1, _int, _range(1, 3), "spatial dimension"),
        "N": Key(512, _int, _even_min(8), "points per axis"),
        "L": Key(16.0, _float, _range(0.0, _INF, lo_open=True), "half period"),
    },
    "model": {
        "kind": Key("quadratic", str, _choice("dcgl_cubic", "dnls_cubic", "cgl_power", "quadratic")),
        "nu": Key(0.0, _float, _range(0.0, 1.0)),
        "lambda1": Key((0j,), _list(_complex)),
        "lambda2": Key((0j,), _list(_complex)),
        "lam": Key((1 + 0j,), _list(_complex)),
        "alpha": Key(0j, _complex),
        "delta": Key(1, _int, _range(1, _INF)),
    },
    "initial": {
        "profile": Key("gaussian", str, _choice("gaussian", "random")),
        "amplitude": Key(0.05, _float, _range(0.0, _INF)),
        "width": Key(1.0, _float, _range(0.0, _INF, lo_open=True)),
        "seed": Key(0, _int, _range(0, _INF)),
        "band": Key(4.0, _float, _range(0.0, _INF, lo_open=True)),
    },
    "solver": {
        "dt": Key(0.01, _float, _range(0.0, _INF, lo_open=True)),
        "T": Key(1.0, _float, _range(0.0, _INF)),
        "scheme": Key("strang_etd", str, _choice("strang_etd", "picard")),
        "picard_max_iters": Key(50, _int, _range(1, _INF)),
        "picard_tol": Key(1e-12, _float, _range(0.0, _INF, lo_open=True)),
        "blowup_threshold": Key(None, _optional(_float), _range(0.0, _INF, lo_open=True)),
        "snapshot_stride": Key(10, _int, _range(1, _INF)),
    },
    "sweep": {
        "nus": Key((0.1, 10 ** -1.5, 0.01, 10 ** -2.5, 0.001), _list(_float), _descending),
        "norms": Key(("l2", "m21"), _list(str), _choice("l2", "m21", "m11", "l1")),
        "workers": Key(1, _int, _range(1, _INF)),
        "expect_slope": Key(None, _optional(_float)),
        "slope_tol": Key(0.1, _float, _range(0.0, _INF, lo_open=True)),
        "max_residual": Key(0.05, _float, _range(0.0, _INF, lo_open=True)),
    },
    "verify": {
        "probes": Key(("interpolation", "smoothing", "kernel"), _list(str),
                      _choice("interpolation", "smoothing", "kernel")),
        "seed": Key(0, _int, _range(0, _INF)),
        "interp_samples": Key(20, _int, _range(1, _INF)),
        "interp_s": Key(1.0, _float),
        "interp_eps": Key(0.5, _float, _range(0.0, _INF, lo_open=True)),
        "interp_n": Key((1, 2), _list(_int), _range(1, 3)),
        "interp_N": Key(32, _int, _even_min(8)),
        "interp_L": Key(2 * TWO_PI, _float, _range(0.0, _INF, lo_open=True)),
        "smoothing_k": Key((8, 16), _list(_int)),
        "smoothing_nu": Key((0.001, 0.01), _list(_float), _range(0.0, 1.0)),
        "smoothing_N": Key(512, _int, _even_min(8)),
        "smoothing_L": Key(4 * TWO_PI, _float, _range(0.0, _INF, lo_open=True)),
        "smoothing_growth": Key(0.2, _float, _range(0.0, _INF, lo_open=True)),
        "scaling_band": Key((0.6, 0.85), _list(_float)),
        "kernel_taus": Key((-1.0, -0.01, 0.0, 0.25, 1.0), _list(_float)),
        "kernel_zs": Key((-1.0, 0.0, 1.0), _list(_float)),
        "kernel_nus": Key((0.0, 0.01, 1.0), _list(_float), _range(0.0, 1.0)),
        "kernel_ss": Key((0.0, 1.0, 10.0), _list(_float), _range(0.0, _INF)),
        "kernel_cutoff": Key(40.0, _float, _range(2.0, _INF)),
        "kernel_nodes": Key(16, _int, _range(2, _INF)),
        "kernel_tol": Key(1e-6, _float, _range(0.0, _INF, lo_open=True)),
        "kernel_stability": Key(0.2, _float, _range(0.0, _INF, lo_open=True)),
    },
    "norms": {
        "input": Key("", str),
        "spaces": Key(("M21:0", "M11:0", "H:0", "L:2"), _list(str)),
    },
}

COMMANDS = ("simulate", "sweep", "verify", "norms")


@dataclass
class RunConfig:
    """Resolved configuration; ``values[section][key]`` holds typed values."""

    command: str
    values: dict
    config_path: str | None = None
    overrides: tuple = ()
    out: str | None = None
    workers: int | None = None
    seed: int | None = None
    seed_source: str = "default"
    explicit: set = field(default_factory=set)   # (section, key) set by file or override

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def dump(self) -> str:
        return dump_config(self.values)


def defaults() -> dict:
    return {sec: {k: spec.default for k, spec in keys.items()} for sec, keys in SCHEMA.items()}


def dump_config(values: dict) -> str:
    """Every section and key in schema order; itself a valid config file."""
    lines = []
    for sec, keys in SCHEMA.items():
        if lines:
            lines.append("")
        lines.append(f"[{sec}]")
        for k in keys:
            lines.append(f"{k} = {_fmt_value(values[sec][k])}")
    return "\n".join(lines) + "\n"


def _assign(values, explicit, problems, sec, key, raw, where):
    keys = SCHEMA.get(sec)
    if keys is None:
        problems.append(f"{where}: unknown section [{sec}]")
        return
    spec = keys.get(key)
    if spec is None:
        problems.append(f"{where}: unknown key {key!r} in [{sec}] (allowed: {', '.join(keys)})")
        return
    try:
        v = spec.parse(raw)
    except (ValueError, TypeError) as exc:
        problems.append(f"{where}: [{sec}] {key} = {raw!r}: type mismatch ({exc})")
        return
    if spec.check is not None:
        msg = spec.check(v)
        if msg:
            problems.append(f"{where}: [{sec}] {key}: {msg}")
            return
    values[sec][key] = v
    explicit.add((sec, key))


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_config(text: str, command: str = "simulate", overrides=()) -> RunConfig:
    """Parse ``text``, apply ``section.key=value`` overrides, validate everything.

    Raises :class:`ConfigError` listing every problem found.
    """
    values = defaults()
    explicit: set = set()
    problems: list = []
    if command not in COMMANDS:
        problems.append(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    sec = None
    for no, line in enumerate(text.splitlines(), 1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]") or len(body) < 3:
                problems.append(f"line {no}: malformed section header {body!r}")
                sec = None
                continue
            sec = body[1:-1].strip()
            if sec not in SCHEMA:
                problems.append(f"line {no}: unknown section [{sec}]")
            continue
        if "=" not in body:
            problems.append(f"line {no}: expected 'key = value', got {body!r}")
            continue
        key, raw = (p.strip() for p in body.split("=", 1))
        if sec is None:
            problems.append(f"line {no}: key {key!r} outside any section")
            continue
        if sec not in SCHEMA:
            continue
        _assign(values, explicit, problems, sec, key, raw, f"line {no}")
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            problems.append(f"override {ov!r}: expected section.key=value")
            continue
        lhs, raw = ov.split("=", 1)
        s, k = lhs.strip().split(".", 1)
        _assign(values, explicit, problems, s, k.strip(), raw.strip(), f"override {ov!r}")
    problems += _cross_checks(values)
    m = values["model"]
    if m["kind"] != "quadratic" and ("model", "lam") in explicit and any(x != 0 for x in m["lam"]):
        problems.append(f"[model] lam is read only by kind quadratic, not {m['kind']}")
    if m["kind"] == "quadratic":
        for name in ("lambda1", "lambda2"):
            if any(x != 0 for x in m[name]):
                problems.append(f"[model] {name} must be 0 for kind quadratic")
        if m["alpha"] != 0:
            problems.append("[model] alpha must be 0 for kind quadratic")
    if problems:
        raise ConfigError(problems)
    return RunConfig(command, values, overrides=tuple(overrides), explicit=explicit)


def _cross_checks(v: dict) -> list:
    out = []
    g, m, s = v["grid"], v["model"], v["solver"]
    if math.pi / g["L"] > 0.25:
        out.append(f"[grid] L = {g['L']!r}: lattice spacing pi/L must be <= 1/4 (L >= {4 * math.pi:.6f})")
    if m["kind"] == "dnls_cubic" and m["nu"] != 0:
        out.append("[model] nu must be 0 for kind dnls_cubic")
    n = g["n"]
    for name in ("lambda1", "lambda2", "lam"):
        if len(m[name]) not in (1, n):
            out.append(f"[model] {name} has {len(m[name])} entries; expected 1 or n = {n}")
    if s["T"] > 0:
        steps = s["T"] / s["dt"]
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            out.append(f"[solver] dt = {s['dt']!r} does not divide T = {s['T']!r}")
        elif round(steps) % s["snapshot_stride"]:
            out.append(f"[solver] snapshot_stride = {s['snapshot_stride']} does not divide {round(steps)} steps")
    band = v["verify"]["scaling_band"]
    if len(band) != 2 or band[0] >= band[1]:
        out.append("[verify] scaling_band must be two increasing numbers")
    if any(abs(k) < 4 for k in v["verify"]["smoothing_k"]):
        out.append("[verify] smoothing_k entries must satisfy |k| >= 4")
    for sp in v["norms"]["spaces"]:
        try:
            parse_space(sp)
        except ValueError as exc:
            out.append(f"[norms] spaces: {exc}")
    return out


def parse_space(text: str):
    """``KIND[:s]`` with KIND in M21, M11, H, Hdot, or ``L:p`` (p may be ``inf``)."""
    from .decomposition import NormSpec
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "L":
        p = float(arg) if arg else 2.0
        return NormSpec("L", 0.0, p)
    if kind not in ("M21", "M11", "H", "Hdot"):
        raise ValueError(f"unknown space {text!r}")
    return NormSpec(kind, float(arg) if arg else 0.0)
