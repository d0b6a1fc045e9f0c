"""Command-line driver: JSON scenarios, subcommands, reports and CSV series.

Every subcommand resolves one scenario dictionary from, in increasing
priority, built-in defaults, ``--config FILE``, subcommand flags and trailing
``key=value`` overrides (dotted keys reach nested fields, e.g.
``grid.n_nodes=201`` or ``options.d=0.3``). The resolved scenario is
embedded in ``report.json``.

Exit status: 0 on success, 2 when the verdict is undecided, 1 on errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import CoefficientPath, compute_bundle, separation_rate
from .dynamics import ModelParams, SpeciesState, dt_max, solve_theta, validate_partition
from .eigen import d_lambda_formula, principal_eigenpair
from .errors import BlowUpError, DomainError, SolverError
from .experiments import (
    closeness_experiment,
    dockery_morse_check,
    exclusion_experiment,
    hausdorff_distance,
    invasion_matrix,
    random_diffusion_sets,
    sweep,
)
from .expr import ParseError, parse, sample
from .grid import Grid

KINDS = ("steady", "eigen", "bundle", "exclusion", "closeness", "invasion", "morse2", "sweep")

DEFAULT_M = "1 + 0.5*cos(3.141592653589793*x)"

DEFAULTS = {
    "kind": None,
    "grid": {"L": 1.0, "n_nodes": 401},
    "m": DEFAULT_M,
    "diffusions": [0.2, 0.4],
    "partition": None,
    "initial": None,
    "dt": 0.001,
    "T": 400.0,
    "stride": None,
    "seed": 42,
    "workers": None,
    "out": "out",
    "options": {},
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------- config


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = _parse_value(value)


def _number_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _partition_arg(text):
    if isinstance(text, list):
        return text
    return [[int(i) for i in block.split(",")] for block in str(text).split(";")]


def load_scenario(config_path=None, flags: dict | None = None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            with open(config_path) as fh:
                cfg = _merge(cfg, json.load(fh))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    for key, value in (flags or {}).items():
        if value is not None:
            apply_override(cfg, f"{key}={json.dumps(value)}")
    for item in overrides:
        apply_override(cfg, item)
    return cfg


def _positive(path, value, integer=False):
    try:
        v = int(value) if integer else float(value)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected a number, got {value!r}") from None
    if integer and v != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not v > 0 or not math.isfinite(v):
        raise ConfigError(path, f"must be positive, got {value!r}")
    return v


def _expr(path, text):
    if isinstance(text, (int, float)):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ConfigError(path, f"expected an expression string, got {text!r}")
    try:
        return parse(text)
    except ParseError as exc:
        raise ConfigError(path, str(exc)) from None


def validate(cfg: dict) -> dict:
    """Check a resolved scenario; returns a dict of built objects."""
    if cfg.get("kind") not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}, got {cfg.get('kind')!r}")
    g = cfg.get("grid") or {}
    L = _positive("grid.L", g.get("L"))
    n = g.get("n_nodes")
    if not isinstance(n, int) or n < 3:
        raise ConfigError("grid.n_nodes", f"must be an integer >= 3, got {n!r}")
    grid = Grid(L, n)
    try:
        m = sample(_expr("m", cfg.get("m")), grid)
    except DomainError as exc:
        raise ConfigError("m", str(exc)) from None

    ds = cfg.get("diffusions")
    if not isinstance(ds, list) or not ds:
        raise ConfigError("diffusions", "must be a non-empty list of positive numbers")
    ds = [_positive(f"diffusions[{i}]", d) for i, d in enumerate(ds)]
    if any(b < a for a, b in zip(ds, ds[1:])):
        raise ConfigError("diffusions", f"must be sorted non-decreasing, got {ds}")

    partition = cfg.get("partition")
    if partition is not None:
        try:
            partition = validate_partition(partition, len(ds))
        except (TypeError, ValueError) as exc:
            raise ConfigError("partition", str(exc)) from None

    initial = cfg.get("initial")
    if initial is None:
        initial = [0.3] * len(ds)
    if not isinstance(initial, list) or len(initial) != len(ds):
        raise ConfigError("initial", f"need one expression per species ({len(ds)})")
    rows = []
    for i, text in enumerate(initial):
        try:
            rows.append(sample(_expr(f"initial[{i}]", text), grid).values)
        except DomainError as exc:
            raise ConfigError(f"initial[{i}]", str(exc)) from None
    try:
        u0 = SpeciesState(grid, np.array(rows))
    except ValueError as exc:
        raise ConfigError("initial", str(exc)) from None

    dt = _positive("dt", cfg.get("dt"))
    params = ModelParams(m, tuple(ds), partition)
    if dt > dt_max(params) * (1 + 1e-12):
        raise ConfigError("dt", f"must not exceed dt_max = {dt_max(params):.6g}")
    T = _positive("T", cfg.get("T"))
    stride = cfg.get("stride")
    if stride is not None:
        stride = _positive("stride", stride, integer=True)
    seed = cfg.get("seed", 42)
    if not isinstance(seed, int):
        raise ConfigError("seed", f"must be an integer, got {seed!r}")
    workers = cfg.get("workers")
    if workers is not None:
        workers = _positive("workers", workers, integer=True)
    options = cfg.get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError("options", "must be an object")
    return {
        "grid": grid,
        "m": m,
        "params": params,
        "u0": u0,
        "dt": dt,
        "T": T,
        "stride": stride,
        "seed": seed,
        "workers": workers,
        "options": options,
    }


# ---------------------------------------------------------------- output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_columns(path: Path, header: list[str], columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{float(v):.17g}" for v in row])


def write_report(out: Path, scenario: dict, verdict: str, metrics: dict, series, timestamp=True) -> Path:
    report = {
        "scenario": scenario,
        "verdict": verdict,
        "metrics": metrics,
        "series_files": list(series),
        "version": __version__,
    }
    if timestamp:
        report["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    path = out / "report.json"
    with open(path, "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


# ---------------------------------------------------------------- runners


def _opt(ctx, key, default=None, cast=float):
    value = ctx["options"].get(key, default)
    if value is None:
        raise ConfigError(f"options.{key}", "is required for this subcommand")
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"options.{key}", f"invalid value {value!r}") from None


def _run_steady(ctx, out):
    d = _opt(ctx, "d", ctx["params"].diffusions[0])
    theta = solve_theta(d, ctx["m"])
    write_columns(out / "theta.csv", ["x", "theta"], [ctx["grid"].nodes, theta.values])
    h = ctx["m"] - theta
    metrics = {
        "d": d,
        "theta_sup": theta.max(),
        "theta_inf": theta.min(),
        "lambda_of_m_minus_theta": principal_eigenpair(d, h).lam,
    }
    return "ok", metrics, ["theta.csv"]


def _h_field(ctx):
    text = ctx["options"].get("h")
    if text is None:
        return ctx["m"]
    return sample(_expr("options.h", text), ctx["grid"])


def _run_eigen(ctx, out):
    d = _opt(ctx, "d", ctx["params"].diffusions[0])
    pair = principal_eigenpair(d, _h_field(ctx))
    write_columns(out / "psi.csv", ["x", "psi"], [ctx["grid"].nodes, pair.psi.values])
    metrics = {
        "d": d,
        "lambda": pair.lam,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "d_lambda": d_lambda_formula(pair),
    }
    return "ok", metrics, ["psi.csv"]


def _run_bundle(ctx, out):
    d = _opt(ctx, "d", ctx["params"].diffusions[0])
    text = ctx["options"].get("h")
    path = CoefficientPath.static(ctx["m"]) if text is None else CoefficientPath.from_expr(
        _expr("options.h", text), ctx["grid"]
    )
    t0 = _opt(ctx, "t0", 0.0)
    t1 = _opt(ctx, "t1", 10.0)
    spinup = ctx["options"].get("spinup")
    stride = ctx["stride"] or 1
    bt = compute_bundle(d, path, t0, t1, spinup, ctx["dt"], stride)
    bt.to_csv(out / "bundle.csv")
    trials = _opt(ctx, "trials", 3, int)
    gamma = separation_rate(d, path, t0, t1, ctx["dt"], trials, ctx["seed"], bt.spinup)
    metrics = {
        "d": d,
        "H_min": bt.H.min(),
        "H_max": bt.H.max(),
        "harnack": bt.harnack,
        "normalization_error": bt.normalization_error,
        "spinup": bt.spinup,
        "gamma": gamma,
    }
    return "ok", metrics, ["bundle.csv"]


def _run_exclusion(ctx, out):
    tol = _opt(ctx, "tol", 1e-3)
    rep = exclusion_experiment(ctx["params"], ctx["u0"], ctx["T"], ctx["dt"], ctx["stride"], tol)
    rep.trajectory.to_csv(out / "trajectory.csv")
    return rep.verdict, rep.to_dict(), ["trajectory.csv"]


def _run_closeness(ctx, out):
    hat = ctx["options"].get("hat_diffusions")
    if hat is None:
        raise ConfigError("options.hat_diffusions", "is required for closeness")
    partition = ctx["params"].partition
    if partition is None:
        raise ConfigError("partition", "is required for closeness")
    rep = closeness_experiment(
        _number_list(hat), ctx["params"].diffusions, partition, ctx["u0"], ctx["T"], ctx["dt"],
        ctx["m"], ctx["stride"] or 10,
    )
    return "ok", rep.to_dict(), []


def _run_invasion(ctx, out):
    M = invasion_matrix(ctx["params"])
    n = M.shape[0]
    write_columns(out / "invasion.csv", [f"resident_{j + 1}" for j in range(n)], M.T)
    ordered = all(
        (M[i, j] < 0) if i < j else (M[i, j] > 0) for i in range(n) for j in range(n) if i != j
    )
    metrics = {"matrix": M, "ordered": ordered}
    return ("ordered" if ordered else "undecided"), metrics, ["invasion.csv"]


def _run_morse2(ctx, out):
    tol = _opt(ctx, "tol", 1e-3)
    rep = dockery_morse_check(ctx["params"], ctx["dt"], ctx["T"], tol)
    return rep.verdict, rep.to_dict(), []


def _run_sweep(ctx, out):
    opts = ctx["options"]
    around = _number_list(opts.get("around", [0.2, 0.4]))
    radius = _opt(ctx, "radius", 0.02)
    count = _opt(ctx, "count", 20, int)
    sizes = [int(s) for s in opts.get("sizes", [3, 4])]
    tol = _opt(ctx, "tol", 1e-3)
    sets = random_diffusion_sets(around, radius, count, sizes, ctx["seed"])
    reports = sweep(ctx["m"], sets, ctx["T"], ctx["dt"], _opt(ctx, "level", 0.3), tol, ctx["workers"])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "diffusions", "hausdorff", "final_distance", "verdict"])
        for k, (ds, rep) in enumerate(zip(sets, reports)):
            w.writerow([k, " ".join(f"{d:.17g}" for d in ds), f"{hausdorff_distance(ds, around):.17g}",
                        f"{rep.final_distance:.17g}", rep.verdict])
    verdicts = [r.verdict for r in reports]
    metrics = {
        "count": len(reports),
        "excluded": verdicts.count("excluded"),
        "reports": [r.to_dict() for r in reports],
    }
    verdict = "excluded" if all(v == "excluded" for v in verdicts) else "undecided"
    return verdict, metrics, ["sweep.csv"]


RUNNERS = {
    "steady": _run_steady,
    "eigen": _run_eigen,
    "bundle": _run_bundle,
    "exclusion": _run_exclusion,
    "closeness": _run_closeness,
    "invasion": _run_invasion,
    "morse2": _run_morse2,
    "sweep": _run_sweep,
}


def run(config_path=None, overrides=(), *, kind=None, flags=None, out=None, timestamp=True,
        stdout=None) -> int:
    """Execute one scenario and return the process exit status."""
    stdout = stdout or sys.stdout
    try:
        cfg = load_scenario(config_path, flags, overrides)
        if kind is not None:
            cfg["kind"] = kind
        if out is not None:
            cfg["out"] = str(out)
        ctx = validate(cfg)
        out_dir = Path(cfg["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        verdict, metrics, series = RUNNERS[cfg["kind"]](ctx, out_dir)
        write_report(out_dir, cfg, verdict, metrics, series, timestamp)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, BlowUpError, DomainError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = " ".join(
        f"{k}={v:.6g}" for k, v in metrics.items() if isinstance(v, (float, int)) and not isinstance(v, bool)
    )
    print(f"{cfg['kind']}: verdict={verdict} {summary}".rstrip(), file=stdout)
    return 2 if verdict == "undecided" else 0


# ---------------------------------------------------------------- argparse


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario file")
    p.add_argument("--out", help="output directory for report.json and CSV series")
    p.add_argument("--seed", type=int, help="random seed (default 42)")
    p.add_argument("--workers", type=int, help="worker processes for sweep")
    p.add_argument("--no-timestamp", action="store_true", help="omit the creation time from the report")
    p.add_argument("--L", type=float, help="domain length")
    p.add_argument("--n", type=int, help="number of grid nodes")
    p.add_argument("--m", help="resource profile m(x)")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--diffusions", help="comma-separated diffusion rates")
    p.add_argument("overrides", nargs="*", metavar="key=value", help="scenario overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispersal-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="run the scenario named by the config's kind"))

    for name in ("steady", "eigen"):
        p = sub.add_parser(name)
        _common(p)
        p.add_argument("--d", type=float, help="diffusion rate")
        if name == "eigen":
            p.add_argument("--h", help="potential h(x); defaults to m")
    p = sub.add_parser("bundle")
    _common(p)
    p.add_argument("--d", type=float)
    p.add_argument("--h", help="coefficient path h(x, t); defaults to m")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--spinup", type=float)
    p.add_argument("--trials", type=int)
    p = sub.add_parser("exclusion")
    _common(p)
    p.add_argument("--tol", type=float)
    p = sub.add_parser("closeness")
    _common(p)
    p.add_argument("--hat", help="comma-separated clustered rates, one per block")
    p.add_argument("--partition", help="blocks of 0-based species, e.g. '0,1;2'")
    _common(sub.add_parser("invasion"))
    p = sub.add_parser("morse2")
    _common(p)
    p.add_argument("--tol", type=float)
    p = sub.add_parser("sweep")
    _common(p)
    p.add_argument("--around", help="reference diffusion set, comma-separated")
    p.add_argument("--radius", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--tol", type=float)
    return parser


def _flags(ns: argparse.Namespace) -> dict:
    flags = {
        "grid.L": ns.L,
        "grid.n_nodes": ns.n,
        "m": ns.m,
        "dt": ns.dt,
        "T": ns.T,
        "seed": ns.seed,
        "workers": ns.workers,
        "diffusions": _number_list(ns.diffusions) if ns.diffusions else None,
    }
    for key in ("d", "h", "t0", "t1", "spinup", "trials", "tol", "radius", "count"):
        if hasattr(ns, key):
            flags[f"options.{key}"] = getattr(ns, key)
    if getattr(ns, "hat", None):
        flags["options.hat_diffusions"] = _number_list(ns.hat)
    if getattr(ns, "around", None):
        flags["options.around"] = _number_list(ns.around)
    if getattr(ns, "partition", None):
        flags["partition"] = _partition_arg(ns.partition)
    return flags


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    kind = None if ns.command == "run" else ns.command
    if ns.command == "run" and ns.config is None:
        print("error: run needs --config", file=sys.stderr)
        return 1
    return run(
        ns.config,
        ns.overrides,
        kind=kind,
        flags=_flags(ns),
        out=ns.out,
        timestamp=not ns.no_timestamp,
    )


if __name__ == "__main__":
    sys.exit(main())
