"""Command-line interface.

    volput price --instrument callable --alpha 0.001 --beta 0.2 --k 0.5 \\
        --r 0.05 --strike 0.5 --delta 0.01 --x 0.4
    volput boundary --instrument knockout
    volput curve --instrument american --points 100 --format csv
    volput figure fig3 --out fig3.csv
    volput verify --grid-n 2000 --paths 20000 --seed 7

Parameters come from built-in defaults, then a ``--config`` JSON file,
then flags; later sources win.  Exit codes: 0 success, 1 a verification
tolerance was breached, 2 invalid input, 3 a solver failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    EmptyExerciseSet,
    IterationLimitError,
    MonotonicityLoss,
    NoAdmissibleRoot,
    NonConvergence,
    SimulationError,
    SingularSystem,
)
from .model import ModelParams, PathConfig
from .oracle import MIN_NODES, boundary_from_grid, make_grid, mc_stopping_value, solve_dynkin_grid
from .pricing import Regime, solve_american, solve_callable, solve_knockout
from .validation import check_params, check_positive_float, check_positive_int

log = logging.getLogger(__name__)

EXIT_OK, EXIT_TOLERANCE, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3

DEFAULTS = {
    "alpha": 0.1,
    "beta": 0.1,
    "k": 0.5,
    "r": 0.05,
    "strike": 0.5,
    "delta": 0.05,
    "instrument": "callable",
    "x": None,
    "points": 200,
    "grid_n": 2000,
    "paths": 20000,
    "dt": 1e-3,
    "seed": 0,
    "horizon": 20.0,
    "format": "json",
    "out": None,
}

# parameter sets behind the figure datasets
FIGURE_PRESETS = {
    "fig1": {"alpha": 0.001, "beta": 0.2, "k": 0.5, "r": 0.05, "strike": 0.5, "delta": 0.05},
    "fig3": {"alpha": 0.001, "beta": 0.2, "k": 0.5, "r": 0.05, "strike": 0.5, "delta": 0.01},
}

GRID_TOL = 1e-3
BOUNDARY_CELLS = 2.0
MC_SIGMAS = 3.0

SOLVER_ERRORS = (
    NoAdmissibleRoot,
    SingularSystem,
    IterationLimitError,
    NonConvergence,
    MonotonicityLoss,
    EmptyExerciseSet,
    SimulationError,
    ArithmeticError,
)


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    options: dict = field(default_factory=dict)
    advisories: list = field(default_factory=list)

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None


# --------------------------------------------------------------------------
# parsing


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    sup = argparse.SUPPRESS
    for name in ("alpha", "beta", "k", "r", "strike", "delta"):
        p.add_argument(f"--{name}", type=float, default=sup)
    p.add_argument("--config", default=None, help="JSON file of defaults; flags override it")
    p.add_argument("--format", choices=("csv", "json"), default=sup)
    p.add_argument("--out", default=sup, help="output path (default stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    sup = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="volput", description="Perpetual volatility put pricer")
    sub = parser.add_subparsers(dest="command", required=True)

    instruments = ("american", "knockout", "callable")
    p = sub.add_parser("price", parents=[common], help="value at index levels")
    p.add_argument("--instrument", choices=instruments, default=sup)
    p.add_argument("--x", type=float, nargs="+", default=sup)

    p = sub.add_parser("boundary", parents=[common], help="free boundaries and constants")
    p.add_argument("--instrument", choices=instruments, default=sup)

    p = sub.add_parser("curve", parents=[common], help="value curve on a log grid")
    p.add_argument("--instrument", choices=instruments, default=sup)
    p.add_argument("--x", type=float, nargs="+", default=sup, help="explicit levels instead of a grid")
    p.add_argument("--points", type=int, default=sup)

    p = sub.add_parser("figure", parents=[common], help="figure datasets fig1 / fig3")
    p.add_argument("name", choices=sorted(FIGURE_PRESETS))
    p.add_argument("--points", type=int, default=sup)

    p = sub.add_parser("verify", parents=[common], help="closed form vs grid vs Monte Carlo")
    p.add_argument("--grid-n", dest="grid_n", type=int, default=sup)
    p.add_argument("--paths", type=int, default=sup)
    p.add_argument("--dt", type=float, default=sup)
    p.add_argument("--seed", type=int, default=sup)
    p.add_argument("--horizon", type=float, default=sup)
    return parser


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {key.replace("-", "_"): val for key, val in data.items()}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, preset, config file and flags, then validate."""
    merged = dict(DEFAULTS)
    if args.command == "figure":
        merged.update(FIGURE_PRESETS[args.name])
    if args.config:
        cfg = _load_config(args.config)
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        merged.update(cfg)
    merged.update({key: val for key, val in vars(args).items() if key not in ("command", "config")})

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        params = check_params(merged)
    advisories = [str(w.message) for w in caught if issubclass(w.category, UserWarning)]

    if merged["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {merged['format']!r}")
    if merged["instrument"] not in ("american", "knockout", "callable"):
        raise UsageError(f"unknown instrument {merged['instrument']!r}")
    xs = merged["x"]
    if xs is not None:
        if not isinstance(xs, list):
            xs = [xs]
        merged["x"] = [check_positive_float(v, "x") for v in xs]
    merged["points"] = check_positive_int(merged["points"], "points", 2)
    merged["grid_n"] = check_positive_int(merged["grid_n"], "grid-n", 3)
    merged["paths"] = check_positive_int(merged["paths"], "paths", 2)
    merged["dt"] = check_positive_float(merged["dt"], "dt")
    merged["horizon"] = check_positive_float(merged["horizon"], "horizon")
    if isinstance(merged["seed"], bool) or not isinstance(merged["seed"], int) or merged["seed"] < 0:
        raise UsageError(f"seed must be a non-negative integer, got {merged['seed']!r}")
    options = {key: merged[key] for key in DEFAULTS if key not in ("alpha", "beta", "k", "r", "strike", "delta")}
    if args.command == "figure":
        options["name"] = args.name
    return RunConfig(args.command, params, options, advisories)


# --------------------------------------------------------------------------
# output


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(key): _clean(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(val) for val in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return val if math.isfinite(val) else None
    return obj


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                    for v in row])
    return buf.getvalue()


def _emit(config: RunConfig, text: str) -> None:
    if config.out:
        with open(config.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands


def _solve(config: RunConfig):
    solver = {"american": solve_american, "knockout": solve_knockout, "callable": solve_callable}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solver[config.instrument](config.params)
    config.advisories.extend(str(w.message) for w in caught if issubclass(w.category, UserWarning))
    return sol


def _summary(config: RunConfig, sol) -> dict:
    out = dict(sol.to_dict())
    out["instrument"] = config.instrument
    out["advisories"] = list(config.advisories)
    return out


def cmd_price(config: RunConfig) -> int:
    if not config.x:
        raise UsageError("price needs at least one --x")
    sol = _solve(config)
    values = [float(sol.value(x)) for x in config.x]
    if config.format == "json":
        report = _summary(config, sol)
        report["x"] = list(config.x)
        report["value"] = values
        _emit(config, dumps_json(report))
    else:
        _emit(config, dumps_csv(["x", "value"], zip(config.x, values)))
    return EXIT_OK


def cmd_boundary(config: RunConfig) -> int:
    sol = _solve(config)
    report = _summary(config, sol)
    if config.format == "json":
        _emit(config, dumps_json(report))
    else:
        keys = [key for key in sorted(report) if key not in ("params", "advisories")]
        _emit(config, dumps_csv(keys, [[report[key] for key in keys]]))
    return EXIT_OK


def _log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n + 1)[1:]


def cmd_curve(config: RunConfig) -> int:
    sol = _solve(config)
    K = config.params.strike
    xs = np.asarray(config.x) if config.x else _log_grid(0.5 * sol.boundary_s, 4.0 * K, config.points)
    values = np.asarray(sol.value(xs), dtype=float)
    cols = ["x", "value", "g1", "g2"]
    rows = list(zip(xs, values, config.params.g1(xs), config.params.g2(xs)))
    if config.format == "json":
        report = _summary(config, sol)
        report["columns"] = cols
        report["rows"] = rows
        _emit(config, dumps_json(report))
    else:
        _emit(config, dumps_csv(cols, rows))
    return EXIT_OK


def figure_dataset(params: ModelParams, points: int = 200):
    """Columns ``x, v_callable, v_american, g1, g2`` on a log grid over (s/2, 4K]."""
    callable_sol = solve_callable(params)
    s = min(callable_sol.boundary_s, callable_sol.american.boundary_s)
    xs = _log_grid(0.5 * s, 4.0 * params.strike, points)
    data = {
        "x": xs,
        "v_callable": np.asarray(callable_sol.value(xs), dtype=float),
        "v_american": np.asarray(callable_sol.american.value(xs), dtype=float),
        "g1": params.g1(xs),
        "g2": params.g2(xs),
    }
    return callable_sol, data


def cmd_figure(config: RunConfig) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol, data = figure_dataset(config.params, config.points)
    config.advisories.extend(str(w.message) for w in caught if issubclass(w.category, UserWarning))
    cols = list(data)
    rows = list(zip(*(data[c] for c in cols)))
    if config.format == "json":
        report = sol.to_dict()
        report["figure"] = config.name
        report["advisories"] = list(config.advisories)
        report["columns"] = cols
        report["rows"] = rows
        _emit(config, dumps_json(report))
    else:
        _emit(config, dumps_csv(cols, rows))
    return EXIT_OK


def _check(name, measured, tolerance, passed, **extra):
    out = {"name": name, "measured": measured, "tolerance": tolerance, "passed": bool(passed)}
    out.update(extra)
    return out


def run_verification(config: RunConfig) -> dict:
    """Closed form against the grid game solver and a Monte Carlo replay of the stopping rule."""
    params = config.params
    K = params.strike
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_callable(params)
        grid = make_grid(params, n=config.grid_n)
        grid_sol = solve_dynkin_grid(params, grid)
    config.advisories.extend(str(w.message) for w in caught if issubclass(w.category, UserWarning))
    checks = [_check("grid_resolution", config.grid_n, MIN_NODES, config.grid_n >= MIN_NODES)]
    s = sol.boundary_s

    lo, hi = 1.2 * s, 0.8 * grid.x_max
    x = grid.nodes
    window = x[(x >= lo) & (x <= hi)]
    err = float(np.max(np.abs(grid_sol.interpolate(window) - sol.value(window))))
    checks.append(_check("grid_convergence", err, GRID_TOL, err <= GRID_TOL,
                         window=[lo, hi], sweeps=grid_sol.iterations))

    try:
        s_grid = boundary_from_grid(grid_sol)
        cell = s * math.expm1(grid.log_step)
        cells = abs(s_grid - s) / cell
    except EmptyExerciseSet:
        s_grid, cells = None, math.inf
    checks.append(_check("grid_boundary_cells", cells, BOUNDARY_CELLS, cells <= BOUNDARY_CELLS,
                         s_closed_form=s, s_grid=s_grid))

    sandwich = grid_sol.values
    worst = float(max(np.max(grid_sol.g1 - sandwich), np.max(sandwich - grid_sol.g2)))
    checks.append(_check("grid_sandwich", worst, 0.0, worst <= 0.0))

    if sol.regime is Regime.AMERICAN_EQUIVALENT:
        barrier, rebate, terminal, max_frac = None, 0.0, sol.american.value, 1.0
        x0 = 0.5 * (s + K)
    else:
        barrier = sol.cancel_boundary
        rebate = float(params.g2(barrier))
        terminal, max_frac = None, 0.05
        x0 = 0.5 * (s + barrier)
    est = mc_stopping_value(
        params,
        PathConfig(x0, config.dt, config.horizon, config.seed, config.paths),
        s,
        barrier,
        rebate,
        max_horizon_fraction=max_frac,
        terminal_value=terminal,
    )
    exact = float(sol.value(x0))
    z = (est.mean - exact) / est.std_error if est.std_error > 0 else math.inf
    checks.append(_check("mc_z_score", abs(z), MC_SIGMAS, abs(z) <= MC_SIGMAS,
                         x0=x0, mc_mean=est.mean, mc_std_error=est.std_error, closed_form=exact))

    theorem3 = None
    if params.delta > 0 and sol.knockout is not None:
        tail_x = np.geomspace(K * (1 + 1e-6), 100 * K, 200)
        theorem3 = bool(np.all([sol.knockout.tail(v) < params.delta for v in tail_x]))

    failures = [c["name"] for c in checks if not c["passed"]]
    return {
        "params": params.to_dict(),
        "regime": sol.regime.value,
        "s": s,
        "c": sol.cancel_boundary,
        "delta_star": sol.delta_star,
        "a": sol.slope_a,
        "d1": sol.d1,
        "theorem3": theorem3,
        "theorem4": sol.theorem4,
        "theorem5": sol.theorem5,
        "grid_n": config.grid_n,
        "paths": config.paths,
        "dt": config.dt,
        "seed": config.seed,
        "checks": checks,
        "failures": failures,
        "passed": not failures,
        "advisories": list(config.advisories),
    }


def cmd_verify(config: RunConfig) -> int:
    report = run_verification(config)
    if config.format == "json":
        _emit(config, dumps_json(report))
    else:
        cols = ["name", "measured", "tolerance", "passed"]
        _emit(config, dumps_csv(cols, [[c[k] for k in cols] for c in report["checks"]]))
    return EXIT_OK if report["passed"] else EXIT_TOLERANCE


COMMANDS = {
    "price": cmd_price,
    "boundary": cmd_boundary,
    "curve": cmd_curve,
    "figure": cmd_figure,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    config = None
    try:
        config = resolve_config(args)
        return COMMANDS[config.command](config)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        if config is not None:
            for msg in dict.fromkeys(config.advisories):
                print(f"advisory: {msg}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
