"""Experiment configuration files.

A config is a TOML document::

    experiment = "halfform"
    seed = 7

    [model]
    preset = "cp1"            # or: weights = [[1], [1]], level = [1]
                              # or: kind = "chain", n = 3, twists = [1, 2]

    [grid]
    k = "4:64:*2"             # start:stop:step, start:stop:*factor or a list

    [tolerances]
    fit = 1e-3

    [options]
    ray = [0.5, 0.5]

    [output]
    csv = "halfform.csv"
    json = "halfform.json"

Validation errors are :class:`ConfigError` instances whose message starts
with the offending field.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import WeightSystem, preset
from .matrix_varieties import MatrixChainSpec

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "EXPERIMENTS",
    "SAMPLING_EXPERIMENTS",
    "parse_grid",
    "load_config",
    "config_from_dict",
]


class ConfigError(ValueError):
    """Schema violation; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


EXPERIMENTS = (
    "psi-grid",
    "psi-cross-check",
    "norms",
    "halfform",
    "laplace",
    "moments",
    "dos",
    "matrix-psi",
    "chain-eigen",
)
SAMPLING_EXPERIMENTS = ("psi-grid", "psi-cross-check", "matrix-psi", "chain-eigen")
MATRIX_EXPERIMENTS = ("matrix-psi", "chain-eigen")

# per experiment: default grid, default tolerances
DEFAULTS = {
    "psi-grid": ({"t": "0:3:0.25"}, {"identity": 1e-8, "nonpositive": 1e-9}),
    "psi-cross-check": ({}, {"agreement": 1e-8, "ode": 1e-6, "projective": 1e-10}),
    "norms": ({"k": "1:4:1"}, {"quadrature": 1e-9}),
    "halfform": ({"k": "4:64:*2"}, {"fit": 1e-3}),
    "laplace": ({"lam": "25:200:*2"}, {"deviation": 3.0, "exponent": 0.02}),
    "moments": ({"N": "25:200:*2"}, {"ratio_low": 0.4, "ratio_high": 0.6, "transfer": 0.02}),
    "dos": ({"N": "10:100:10"}, {"leading": 1e-4}),
    "matrix-psi": ({}, {"agreement": 1e-8, "identity": 1e-8, "nonpositive": 1e-9}),
    "chain-eigen": ({}, {"eigenvalues": 1e-10}),
}

TOP_LEVEL = {"experiment", "seed", "samples", "jobs", "model", "grid", "tolerances", "options", "output"}


def parse_grid(spec, name: str = "grid") -> list[float]:
    """``"a:b:s"`` (arithmetic), ``"a:b:*f"`` (geometric), a list, or a scalar.

    Endpoints are inclusive; integral values come back as ints.
    """
    if isinstance(spec, (list, tuple)):
        vals = [_number(v, name) for v in spec]
    elif isinstance(spec, (int, float)) and not isinstance(spec, bool):
        vals = [spec]
    elif isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(name, f"grid {spec!r} must look like start:stop:step or start:stop:*factor")
        start, stop = (_fraction(p, name) for p in parts[:2])
        step = parts[2].strip()
        vals = []
        x = start
        if step.startswith("*"):
            f = _fraction(step[1:], name)
            if f <= 1 or start <= 0:
                raise ConfigError(name, "geometric grids need start > 0 and factor > 1")
            while x <= stop:
                vals.append(x)
                x *= f
        else:
            s = _fraction(step, name)
            if s <= 0:
                raise ConfigError(name, "step must be positive")
            while x <= stop:
                vals.append(x)
                x += s
        vals = [int(v) if v.denominator == 1 else float(v) for v in vals]
    else:
        raise ConfigError(name, f"cannot read a grid from {spec!r}")
    if not vals:
        raise ConfigError(name, "grid is empty")
    return vals


def _fraction(text: str, name: str) -> Fraction:
    # decimal strings convert exactly, so "0:3:0.1" ends at 3
    _number(text, name)
    return Fraction(text.strip())


def _number(v, name):
    if isinstance(v, bool):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return v
    try:
        s = str(v).strip()
        return int(s) if s.lstrip("+-").isdigit() else float(s)
    except ValueError:
        raise ConfigError(name, f"expected a number, got {v!r}") from None


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict
    grid: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int | None = None
    samples: int = 200
    jobs: int = 1
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """The validated config as plain data, for the JSON summary."""
        return {
            "experiment": self.experiment,
            "model": self.model,
            "grid": self.grid,
            "tolerances": self.tolerances,
            "options": self.options,
            "seed": self.seed,
            "samples": self.samples,
        }

    # model accessors

    def weight_system(self) -> WeightSystem:
        return _toric_model(self.model)

    def chain_spec(self) -> MatrixChainSpec:
        m = self.model
        return MatrixChainSpec(int(m["n"]), tuple(m["twists"]), float(m.get("top", 0.0)))


def _toric_model(model: dict) -> WeightSystem:
    if "preset" in model:
        ws = preset(model["preset"])
        if "level" in model:
            ws = ws.with_level(model["level"])
        return ws
    return WeightSystem(model["weights"], model["level"], model.get("polarizer"))


def _check_model(model, experiment: str) -> dict:
    if not isinstance(model, dict):
        raise ConfigError("model", "must be a table")
    model = dict(model)
    kind = model.get("kind", "toric")
    if experiment in MATRIX_EXPERIMENTS:
        if experiment == "chain-eigen" and kind != "chain":
            raise ConfigError("model.kind", "chain-eigen needs kind = \"chain\"")
        if kind not in ("grassmannian", "chain", "polygon"):
            raise ConfigError("model.kind", f"matrix experiments need grassmannian, chain or polygon, got {kind!r}")
    elif kind != "toric":
        raise ConfigError("model.kind", f"experiment {experiment!r} needs a toric model")
    if kind == "toric":
        if "preset" not in model and not ("weights" in model and "level" in model):
            raise ConfigError("model", "give preset or both weights and level")
        try:
            ws = _toric_model(model)
        except ValueError as exc:
            msg = str(exc)
            # validation messages start with the name of the offending entry
            name = msg.replace(":", " ").split()[0]
            field_name = f"model.{name}" if name in ("weights", "level", "polarizer") else "model.preset"
            if "length" in msg and "level" in msg:
                field_name = "model.level"
            raise ConfigError(field_name, msg) from None
        model["kind"] = "toric"
        model.setdefault("name", ws.name)
    elif kind == "grassmannian":
        for key in ("k", "n"):
            if not isinstance(model.get(key), int) or model[key] < 1:
                raise ConfigError(f"model.{key}", "must be a positive integer")
        if model["k"] >= model["n"]:
            raise ConfigError("model.k", "must be smaller than n")
        m = model.setdefault("m", 1)
        if not isinstance(m, int) or m < 1:
            raise ConfigError("model.m", "must be a positive integer")
    elif kind == "chain":
        n = model.get("n")
        if not isinstance(n, int) or n < 2:
            raise ConfigError("model.n", "chain length must be an integer >= 2")
        tw = model.get("twists")
        if not isinstance(tw, list) or len(tw) != n - 1:
            raise ConfigError("model.twists", f"expected a list of {n - 1} positive numbers")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) or x <= 0 for x in tw):
            raise ConfigError("model.twists", "twists must be positive numbers")
        top = model.setdefault("top", 0.0)
        if isinstance(top, bool) or not isinstance(top, (int, float)):
            raise ConfigError("model.top", "must be a number")
    elif kind == "polygon":
        lam = model.get("lambdas")
        if not isinstance(lam, list) or len(lam) < 4:
            raise ConfigError("model.lambdas", "expected m + 1 >= 4 numbers")
        if any(x >= 0 for x in lam[:-1]):
            raise ConfigError("model.lambdas", "arm levels lambda_1..lambda_m must be negative")
    else:
        raise ConfigError("model.kind", f"unknown model kind {kind!r}")
    model["kind"] = kind
    return model


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed config (defaults filled in)."""
    if not isinstance(data, dict):
        raise ConfigError("config", "must be a table")
    raw = copy.deepcopy(data)
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level field")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")

    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed", "must be a nonnegative integer")
    if exp in SAMPLING_EXPERIMENTS and seed is None:
        raise ConfigError("seed", f"is mandatory for the sampling experiment {exp!r}")
    samples = data.get("samples", 200 if exp != "psi-grid" else 50)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        raise ConfigError("samples", "must be a positive integer")
    jobs = data.get("jobs", 1)
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs", "must be a positive integer")

    model = _check_model(data.get("model", {}), exp)

    grid_defaults, tol_defaults = DEFAULTS[exp]
    grid_in = data.get("grid", {})
    if not isinstance(grid_in, dict):
        raise ConfigError("grid", "must be a table")
    grid = {}
    for key, val in {**grid_defaults, **grid_in}.items():
        grid[key] = parse_grid(val, f"grid.{key}")
        if any(v <= 0 for v in grid[key]) and key != "t":
            raise ConfigError(f"grid.{key}", "grid values must be positive")
        if len(set(grid[key])) != len(grid[key]) or sorted(grid[key]) != grid[key]:
            raise ConfigError(f"grid.{key}", "grid must be strictly increasing")

    tol_in = data.get("tolerances", {})
    if not isinstance(tol_in, dict):
        raise ConfigError("tolerances", "must be a table")
    tolerances = {}
    for key, val in {**tol_defaults, **tol_in}.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val) or val <= 0:
            raise ConfigError(f"tolerances.{key}", f"must be a positive number, got {val!r}")
        tolerances[key] = float(val)

    options = data.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options", "must be a table")
    output = data.get("output", {})
    if not isinstance(output, dict) or set(output) - {"csv", "json"}:
        raise ConfigError("output", "must be a table with optional keys csv and json")

    return ExperimentConfig(
        experiment=exp, model=model, grid=grid, tolerances=tolerances, options=dict(options),
        output=dict(output), seed=seed, samples=samples, jobs=jobs, raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    return config_from_dict(data)
