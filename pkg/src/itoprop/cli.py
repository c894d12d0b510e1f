"""
Command-line front end.

    prop run <config>      error traces and a summary table for a dt sweep
    prop compare <config>  error-versus-wall-time frontier for several methods
    prop validate          invariant checks of every module

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import configparser
import csv
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import PropagationError
from .experiments import (
    REF_DT,
    REF_EPS,
    WPI_CARRIER,
    oscillator_spec,
    run_oscillator,
    run_two_level,
    wpi_populations,
    wpi_spec,
)
from .models import DrivenOscillatorSpec, TwoLevelSpec, relative_error, wpi_ratio

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SYSTEMS = ("twolevel", "oscillator", "wpi")
METHODS = ("ito", "cheb", "split", "rk4")
GRID_SYSTEMS = ("oscillator", "wpi")

SUMMARY_COLUMNS = ["system", "method", "area", "dt", "N_t", "m_k", "N_Cheby", "eps_sol_max",
                   "eps_norm_max", "k_max", "wall_seconds", "status", "reason"]


class ConfigError(Exception):
    pass


# -- configuration ------------------------------------------------------------------
def _floats(text):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"not a number list: {text!r}") from exc
    if not vals:
        raise ConfigError("empty sweep list")
    return vals


def _words(text):
    vals = [v.strip().lower() for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("empty list")
    return vals


def _int(text):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _float(text):
    vals = _floats(text)
    if len(vals) != 1:
        raise ConfigError(f"expected one number, got {text!r}")
    return vals[0]


# section -> key -> parser
SCHEMA = {
    "experiment": {
        "system": str.strip, "method": _words, "dt": _floats, "eps": _float, "n_t": _int,
        "record_interval": _float, "output": str.strip,
    },
    "twolevel": {"T": _float, "mu": _float, "e0": _float},
    "oscillator": {"omega0": _float, "e0": _float, "depletion_target": _float, "T": _float,
                   "n_grid": _int, "r_max": _float},
    "wpi": {"phi_over_pi": _floats, "area_over_pi": _floats, "carrier": _float,
            "ref_dt": _float, "ref_eps": _float, "duration": _float},
}

DEFAULT_EPS = {"twolevel": 1e-9, "oscillator": 1e-12, "wpi": REF_EPS}
DEFAULT_NT = {"twolevel": 8, "oscillator": 10, "wpi": 12}


@dataclass
class ExperimentConfig:
    system: str
    methods: list
    dts: list
    eps: float
    n_t: int
    record_interval: float = None
    output: str = None
    params: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def load_config(path):
    """Parse and check an INI experiment file; every problem raises ConfigError."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[(section, key)] = SCHEMA[section][key](raw)

    exp = {k: v for (s, k), v in values.items() if s == "experiment"}
    for key in ("system", "method", "dt"):
        if key not in exp:
            raise ConfigError(f"[experiment] needs {key!r}")
    system = exp["system"].lower()
    if system not in SYSTEMS:
        raise ConfigError(f"system must be one of {SYSTEMS}, got {system!r}")
    for m in exp["method"]:
        if m not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {m!r}")
        if m == "split" and system not in GRID_SYSTEMS:
            raise ConfigError("split-operator needs a grid system (oscillator or wpi)")
    if any(dt <= 0 for dt in exp["dt"]):
        raise ConfigError("dt values must be positive")
    for (s, k) in values:
        if s in SYSTEMS and s != system:
            raise ConfigError(f"section [{s}] does not apply to system {system!r}")
    eps = exp.get("eps", DEFAULT_EPS[system])
    n_t = exp.get("n_t", DEFAULT_NT[system])
    if eps <= 0 or n_t < 2:
        raise ConfigError("eps must be positive and n_t >= 2")
    params = {k: v for (s, k), v in values.items() if s == system}
    return ExperimentConfig(system, exp["method"], exp["dt"], eps, n_t,
                            exp.get("record_interval"), exp.get("output"), params)


# -- sweep points ----------------------------------------------------------------------
def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _twolevel_spec(params):
    return TwoLevelSpec(**{k: params[k] for k in ("T", "mu", "e0") if k in params})


def _oscillator_spec(params):
    kw = {k: params[k] for k in ("T", "n_grid", "r_max") if k in params}
    omega0 = params.get("omega0", 1.0)
    if "e0" in params:
        return DrivenOscillatorSpec(omega0=omega0, e0=params["e0"], **kw)
    return oscillator_spec(float(omega0), params.get("depletion_target"), **kw)


def _trajectory_point(cfg, method, dt):
    if cfg.system == "twolevel":
        res = run_two_level(dt, method, eps=cfg.eps, n_t=cfg.n_t, spec=_twolevel_spec(cfg.params))
    else:
        spec = _oscillator_spec(cfg.params)
        every = None
        if cfg.record_interval is not None:
            every = max(1, int(round(cfg.record_interval / dt)))
        res = run_oscillator(dt, spec.omega0, method, eps=cfg.eps, n_t=cfg.n_t, spec=spec,
                             record_every=every)
    m = res.metrics
    trace = [(t, a, b) for t, a, b in zip(m.times, m.eps_sol, m.eps_norm)]
    s = res.summary
    return {
        "row": {"dt": dt, "N_t": s["n_t"], "m_k": s["m_k"], "N_Cheby": s["n_cheby"],
                "eps_sol_max": m.eps_sol_max, "eps_norm_max": m.eps_norm_max,
                "k_max": s["k_max"], "wall_seconds": res.wall_seconds},
        "trace_header": ["t", "eps_sol", "eps_norm"],
        "trace": trace,
        "derived": res.extra,
    }


def _wpi_point(cfg, method, dt, area):
    p = cfg.params
    phis = [np.pi * v for v in p.get("phi_over_pi", [0.0, 1.0])]
    carrier = p.get("carrier", WPI_CARRIER)
    ref_dt = p.get("ref_dt", REF_DT)
    ref_eps = p.get("ref_eps", REF_EPS)
    kw = {k: p[k] for k in ("duration",) if k in p}
    rows = []
    wall = 0.0
    for phi in phis:
        spec = wpi_spec(phi, area, carrier, **kw)
        ref = wpi_ratio(*reversed(wpi_populations(spec, "ito", ref_dt, ref_eps)))
        start = time.perf_counter()
        if method == "ito" and dt == ref_dt and cfg.eps == ref_eps:
            r = ref
        else:
            r = wpi_ratio(*reversed(wpi_populations(spec, method, dt, cfg.eps)))
        wall += time.perf_counter() - start
        rows.append((phi, r, relative_error(ref, r)))
    return {
        "row": {"area": area, "dt": dt, "eps_sol_max": max(e for _, _, e in rows),
                "wall_seconds": wall},
        "trace_header": ["phi", "R", "eps_sol_rel"],
        "trace": rows,
        "derived": {"e0": 2.0 * spec.area / (spec.mu * spec.duration), "carrier": carrier,
                    "ref_dt": ref_dt},
    }


def run_point(cfg, method, dt, area=None):
    """One sweep point; numerical failures become a failed row."""
    try:
        if cfg.system == "wpi":
            out = _wpi_point(cfg, method, dt, area)
        else:
            out = _trajectory_point(cfg, method, dt)
        out["row"].update(status="ok", reason="")
    except (PropagationError, ArithmeticError, ValueError) as exc:
        out = {"row": {"area": area, "dt": dt, "status": "failed",
                       "reason": f"{type(exc).__name__}: {exc}"},
               "trace_header": [], "trace": [], "derived": {}}
    out["row"].update(system=cfg.system, method=method)
    return out


def _points(cfg):
    areas = [np.pi * a for a in cfg.params.get("area_over_pi", [0.5])] if cfg.system == "wpi" else [None]
    return [(m, dt, a) for m in cfg.methods for a in areas for dt in cfg.dts]


def _execute(cfg, points, threads):
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_point, cfg, *p) for p in points]
            return [f.result() for f in futures]
    return [run_point(cfg, *p) for p in points]


# -- output -------------------------------------------------------------------------------------
def _point_name(cfg, row):
    name = f"{cfg.system}_{row['method']}_dt{_fmt(row['dt'])}"
    if row.get("area") is not None:
        name += f"_area{_fmt(row['area'])}"
    return name.replace(".", "p").replace("-", "m") + ".csv"


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_outputs(cfg, results, out_dir, command, extra_manifest=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    points = []
    for res in results:
        row = res["row"]
        summary.append([row.get(c) for c in SUMMARY_COLUMNS])
        trace_file = None
        if res["trace"]:
            trace_file = _point_name(cfg, row)
            _write_csv(out_dir / trace_file, res["trace_header"], res["trace"])
        points.append({"row": {k: row.get(k) for k in SUMMARY_COLUMNS},
                       "trace_file": trace_file, "derived": res["derived"]})
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary)
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "points": points,
        "platform": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "machine": platform.machine()},
    }
    manifest.update(extra_manifest or {})
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return out_dir


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def frontier(results):
    """Per method: (eps_sol_max, wall_seconds) sorted by wall time."""
    by_method = {}
    for res in results:
        row = res["row"]
        if row["status"] != "ok":
            continue
        by_method.setdefault(row["method"], []).append(
            (row["dt"], row["eps_sol_max"], row["wall_seconds"]))
    return {m: sorted(v, key=lambda x: x[2]) for m, v in by_method.items()}


# -- commands ---------------------------------------------------------------------------------
def cmd_run(args, compare=False):
    cfg = load_config(args.config)
    if compare and len(cfg.methods) < 2:
        raise ConfigError("compare needs at least two methods")
    out_dir = args.out or cfg.output or "prop_out"
    results = _execute(cfg, _points(cfg), args.threads)
    extra = {}
    if compare:
        front = frontier(results)
        rows = [(m, dt, e, w) for m in cfg.methods for dt, e, w in front.get(m, [])]
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_csv(Path(out_dir) / "frontier.csv", ["method", "dt", "eps_sol_max", "wall_seconds"],
                   rows)
        extra["best_error"] = {m: min((e for _, e, _ in v), default=None) for m, v in front.items()}
    write_outputs(cfg, results, out_dir, "compare" if compare else "run", extra)
    failed = [r["row"] for r in results if r["row"]["status"] != "ok"]
    for r in results:
        row = r["row"]
        tag = "FAILED " + row["reason"] if row["status"] != "ok" else \
            f"eps_sol_max={row['eps_sol_max']:.3e}"
        print(f"{cfg.system} {row['method']} dt={row['dt']:g} {tag}")
    print(f"wrote {out_dir}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_validate(args):
    from .validation import run_all

    checks = run_all(seed=args.seed, fault=args.inject_fault)
    report = {"version": __version__, "seed": args.seed, "fault": args.inject_fault,
              "checks": [c.as_dict() for c in checks],
              "passed": all(c.passed for c in checks)}
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value:.3e} tol={c.tolerance:g}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "validate.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep points")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised checks")
    p = argparse.ArgumentParser(prog="prop", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "compare"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("config")
    v = sub.add_parser("validate", parents=[common])
    v.add_argument("--inject-fault", choices=["table"], default=None,
                   help="corrupt a known component (negative control)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_run(args, compare=args.command == "compare")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
