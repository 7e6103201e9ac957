"""Command line driver.

Exit status: 0 when every assertion passes, 1 when one fails, 2 for a
config or usage error, 3 when a numerical routine raises.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, config_from_dict, load_config
from .geometry import list_presets, preset
from .quadrature import QuadratureError

log = logging.getLogger("stabfn")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# --- output ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # repr is the shortest string that round-trips
        return repr(float(v))
    return str(v)


def format_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def format_summary(cfg, result) -> str:
    envelope = {
        "stabfn_version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.echo(),
        "assertions": [a.to_dict() for a in result.assertions],
        "passed": result.passed,
        "result": result.payload,
    }
    return json.dumps(envelope, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".stabfn-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- running --------------------------------------------------------------------------


def execute(cfg, out_csv=None, out_json=None, stream=None) -> int:
    from .experiments import run_experiment

    stream = sys.stdout if stream is None else stream
    try:
        result = run_experiment(cfg)
    except (ValueError, RuntimeError, QuadratureError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_csv = out_csv or cfg.output.get("csv")
    out_json = out_json or cfg.output.get("json")
    if out_csv:
        write_atomic(out_csv, format_csv(result.columns, result.rows))
    if out_json:
        write_atomic(out_json, format_summary(cfg, result))
    for a in result.assertions:
        status = "PASS" if a.passed else "FAIL"
        print(f"{status}  {a.name}: {a.value!r} (tolerance {a.tolerance!r})", file=stream)
    return EXIT_OK if result.passed else EXIT_FAILED


def _json_flag(text: str, field_name: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(field_name, f"invalid JSON: {exc}") from None


def _config_from_args(args, experiment: str):
    if args.config:
        cfg_data = _read_toml(args.config)
    else:
        cfg_data = {}
    if experiment:
        cfg_data["experiment"] = experiment
    model = dict(cfg_data.get("model", {}))
    if getattr(args, "preset", None):
        model = {"preset": args.preset}
    for key in ("weights", "level", "lambdas", "twists"):
        val = getattr(args, key, None)
        if val is not None:
            model[key] = _json_flag(val, f"model.{key}")
    for key in ("kind", "n", "k_rows", "top"):
        val = getattr(args, key, None)
        if val is not None:
            model["k" if key == "k_rows" else key] = val
    if model:
        cfg_data["model"] = model
    grid = dict(cfg_data.get("grid", {}))
    for key in ("k", "lam", "N", "t"):
        val = getattr(args, f"grid_{key}", None)
        if val is not None:
            grid[key] = val
    if grid:
        cfg_data["grid"] = grid
    if args.tol:
        tols = dict(cfg_data.get("tolerances", {}))
        for item in args.tol:
            name, _, value = item.partition("=")
            try:
                tols[name] = float(value)
            except ValueError:
                raise ConfigError(f"tolerances.{name}", f"not a number: {value!r}") from None
        cfg_data["tolerances"] = tols
    if args.option:
        opts = dict(cfg_data.get("options", {}))
        for item in args.option:
            name, _, value = item.partition("=")
            try:
                opts[name] = json.loads(value)
            except json.JSONDecodeError:
                opts[name] = value
        cfg_data["options"] = opts
    for key in ("seed", "samples", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            cfg_data[key] = val
    return config_from_dict(cfg_data)


def _read_toml(path):
    from .config import tomllib

    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("config", str(exc)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None


# --- parser ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, experiments=None):
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--preset", help="model preset, e.g. cp1 or hirzebruch1")
    p.add_argument("--weights", help="inline weights as JSON, e.g. [[1],[1]]")
    p.add_argument("--level", help="inline level as JSON, e.g. [1]")
    if experiments:
        p.add_argument("--experiment", choices=experiments)
    p.add_argument("--k", dest="grid_k", help="k grid, start:stop:step or start:stop:*factor")
    p.add_argument("--lam", dest="grid_lam", help="lambda grid")
    p.add_argument("--N", dest="grid_N", help="N grid")
    p.add_argument("--t", dest="grid_t", help="flow-time grid for psi-grid")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")
    p.add_argument("--option", action="append", metavar="NAME=JSON", help="experiment option")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")


def _matrix_flags(p):
    p.add_argument("--kind", choices=("grassmannian", "chain", "polygon"))
    p.add_argument("--n", type=int, help="chain length or Grassmannian ambient dimension")
    p.add_argument("--rows", dest="k_rows", type=int, help="Grassmannian subspace dimension")
    p.add_argument("--twists", help="chain twists as JSON")
    p.add_argument("--top", type=float, help="chain top level a_n")
    p.add_argument("--lambdas", help="polygon levels as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabfn", description="Stability functions of torus and matrix quotients.")
    parser.add_argument("--version", action="version", version=f"stabfn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run any experiment from a config file or flags")
    _common(p, EXPERIMENTS)
    _matrix_flags(p)

    p = sub.add_parser("psi", help="evaluate psi at points, or run a psi experiment")
    _common(p, ("psi-grid", "psi-cross-check"))
    p.add_argument("--point", help="complex point as JSON pairs [[re, im], ...] or reals")
    p.add_argument("--method", default="definition")
    p.add_argument("--power", type=int, default=1)

    p = sub.add_parser("norms", help="L2 norms of the monomial sections")
    _common(p)

    p = sub.add_parser("asymptotics", help="half-form, Laplace, moment and density-of-states fits")
    _common(p, ("halfform", "laplace", "moments", "dos"))

    p = sub.add_parser("matrix-psi", help="psi on Grassmannians, chains and polygon spaces")
    _common(p)
    _matrix_flags(p)

    p = sub.add_parser("chain-eigen", help="spectrum of the coadjoint image of level-set chains")
    _common(p)
    _matrix_flags(p)

    sub.add_parser("list-presets", help="list the bundled models")
    return parser


def _parse_point(text: str) -> np.ndarray:
    data = json.loads(text)
    return np.array([complex(*x) if isinstance(x, list) else complex(x) for x in data])


def _single_psi(args) -> int:
    from .stability import psi_toric

    from .geometry import WeightSystem

    if args.preset:
        try:
            ws = preset(args.preset)
        except ValueError as exc:
            raise ConfigError("model.preset", str(exc)) from None
    else:
        if not (args.weights and args.level):
            raise ConfigError("model", "give --preset or both --weights and --level")
        try:
            ws = WeightSystem(_json_flag(args.weights, "model.weights"), _json_flag(args.level, "model.level"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("model", str(exc)) from None
    try:
        z = _parse_point(args.point)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ConfigError("point", str(exc)) from None
    if z.shape != (ws.d,):
        raise ConfigError("point", f"must have {ws.d} coordinates, got {z.shape[0]}")
    try:
        ev = psi_toric(ws, z, args.method, args.power)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps({"psi": ev.psi, "method": ev.method, "diagnostics": ev.diagnostics},
                     default=_json_default, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("STABFN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, text in list_presets().items():
                print(f"{name:16s} {text}")
            return EXIT_OK
        if args.command == "psi" and args.point:
            return _single_psi(args)
        experiment = {
            "psi": args.experiment if args.command == "psi" else None,
            "norms": "norms",
            "matrix-psi": "matrix-psi",
            "chain-eigen": "chain-eigen",
        }.get(args.command, getattr(args, "experiment", None))
        if args.command == "psi" and experiment is None:
            experiment = "psi-cross-check"
        if args.command == "matrix-psi" or args.command == "chain-eigen":
            if args.command == "chain-eigen" and getattr(args, "kind", None) is None:
                args.kind = "chain"
        if not experiment and not args.config:
            raise ConfigError("experiment", "give --experiment or --config")
        cfg = _config_from_args(args, experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg, args.out_csv, args.out_json)


if __name__ == "__main__":
    sys.exit(main())
