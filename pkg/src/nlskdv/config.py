"""Scenario configuration: defaults, file parsing, overrides and validation."""

from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("simulate", "stabilize", "control", "transfer", "diagnose")

DEFAULTS = {
    "command": "stabilize",
    "seed": 0,
    "grid": {"N": 64},
    "time": {"T": 20.0, "dt": 1e-3, "record_every": 1},
    "system": {"beta": 1.0, "mu": 0.0, "dealias": "two-thirds", "coupling": True, "quadratic": True, "damped": True},
    "actuator": {"center": math.pi, "half_width": math.pi / 4, "eta": 0.5, "a2_peak": 1.0},
    "initial": {"norm": 1.0, "width": 2.0, "v_mean": 0.0},
    "target": {"norm": 0.0, "width": 2.0},
    "fit": {"t0": 2.0, "t1": 20.0},
    "picard": {"enabled": False, "T": 0.05, "n_time": 2048, "max_iter": 60},
    "control": {"mode": "linear", "T": 1.0, "dt": 0.01, "delta": 0.1, "max_iter": 20, "cg_maxiter": 500, "cg_tol": 1e-12},
    "transfer": {"dt": 2e-3, "delta": 0.05, "T_local": 1.0, "t_max": 400.0, "tol": 1e-4},
    "diagnose": {
        "samples": 100,
        "N": 32,
        "M": 64,
        "span": 4.0,
        "eps": 0.1,
        "k": 0.0,
        "s": 0.0,
        "T": 0.5,
        "b": 0.4,
        "bprime": 0.2,
        "strichartz_T": 1.0,
        "scan_nmax": 512,
        "scan_points_per_side": 250,
        "mu_values": [0.0, 1.0],
    },
    "output": {"compact_controls": False},
}


class ConfigParseError(ValueError):
    """The configuration text could not be parsed."""


class ConfigValidationError(ValueError):
    """A configuration field is out of range or of the wrong type."""


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigValidationError(f"unknown field '{where}'")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigValidationError(f"field '{where}' must be a table")
            out[key] = _merge(out[key], val, where + ".")
        else:
            out[key] = val
    return out


def parse_text(text: str, fmt: str = "toml") -> dict:
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigParseError(str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigParseError("top level must be a table")
    return data


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from exc
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_text(text, fmt)


def parse_value(text: str):
    """Interpret an override value as TOML, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> dict:
    if "=" not in assignment:
        raise ConfigParseError(f"override '{assignment}' is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigValidationError(f"'{key}' does not name a field")
    node[parts[-1]] = parse_value(raw.strip())
    return data


def get_path(values: dict, key: str):
    node = values
    for p in key.split("."):
        if not isinstance(node, dict) or p not in node:
            raise ConfigValidationError(f"unknown field '{key}'")
        node = node[p]
    return node


@dataclass
class ScenarioConfig:
    command: str
    seed: int
    values: dict

    def __getitem__(self, key: str):
        return get_path(self.values, key)

    def resolved(self) -> dict:
        out = copy.deepcopy(self.values)
        out["command"] = self.command
        out["seed"] = self.seed
        return out


def _number(values, key, positive=False, nonneg=False, integer=False, lo=None, hi=None):
    val = get_path(values, key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigValidationError(f"{key} must be a number")
    if integer and int(val) != val:
        raise ConfigValidationError(f"{key} must be an integer")
    if not math.isfinite(val):
        raise ConfigValidationError(f"{key} must be finite")
    if positive and not val > 0:
        raise ConfigValidationError(f"{key} must be positive")
    if nonneg and val < 0:
        raise ConfigValidationError(f"{key} must be nonnegative")
    if lo is not None and val <= lo:
        raise ConfigValidationError(f"{key} must exceed {lo}")
    if hi is not None and val >= hi:
        raise ConfigValidationError(f"{key} must be below {hi}")
    return val


def _divides(values, tkey, dtkey):
    T = get_path(values, tkey)
    dt = get_path(values, dtkey)
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ConfigValidationError(f"{dtkey} must divide {tkey}")


def validate(values: dict) -> None:
    cmd = values["command"]
    if cmd not in COMMANDS:
        raise ConfigValidationError(f"command must be one of {COMMANDS}")
    _number(values, "seed", integer=True, nonneg=True)
    N = _number(values, "grid.N", integer=True, positive=True)
    if N % 2 or N < 4:
        raise ConfigValidationError("grid.N must be even and at least 4")
    _number(values, "time.T", positive=True)
    _number(values, "time.dt", positive=True)
    _number(values, "time.record_every", integer=True, positive=True)
    _divides(values, "time.T", "time.dt")
    _number(values, "system.beta")
    _number(values, "system.mu")
    if values["system"]["dealias"] not in ("two-thirds", "none"):
        raise ConfigValidationError("system.dealias must be 'two-thirds' or 'none'")
    for flag in ("coupling", "quadratic", "damped"):
        if not isinstance(values["system"][flag], bool):
            raise ConfigValidationError(f"system.{flag} must be true or false")
    _number(values, "actuator.center")
    _number(values, "actuator.half_width", lo=0.0, hi=math.pi)
    eta = _number(values, "actuator.eta", positive=True)
    if _number(values, "actuator.a2_peak", positive=True) < eta:
        raise ConfigValidationError("actuator.a2_peak must be at least actuator.eta")
    _number(values, "initial.norm", nonneg=True)
    _number(values, "initial.width", positive=True)
    _number(values, "initial.v_mean")
    _number(values, "target.norm", nonneg=True)
    _number(values, "target.width", positive=True)
    t0 = _number(values, "fit.t0", nonneg=True)
    if _number(values, "fit.t1", positive=True) <= t0:
        raise ConfigValidationError("fit.t1 must exceed fit.t0")
    if cmd == "stabilize" and values["fit"]["t1"] > values["time"]["T"] + 1e-12:
        raise ConfigValidationError("fit.t1 must not exceed time.T")
    _number(values, "picard.T", positive=True)
    _number(values, "picard.n_time", integer=True, positive=True)
    _number(values, "picard.max_iter", integer=True, positive=True)
    if values["control"]["mode"] not in ("linear", "nonlinear"):
        raise ConfigValidationError("control.mode must be 'linear' or 'nonlinear'")
    _number(values, "control.T", positive=True)
    _number(values, "control.dt", positive=True)
    _divides(values, "control.T", "control.dt")
    _number(values, "control.delta", positive=True)
    _number(values, "control.max_iter", integer=True, positive=True)
    _number(values, "control.cg_maxiter", integer=True, positive=True)
    _number(values, "control.cg_tol", positive=True)
    for key in ("dt", "delta", "T_local", "t_max", "tol"):
        _number(values, f"transfer.{key}", positive=True)
    _divides(values, "transfer.T_local", "transfer.dt")
    d = "diagnose."
    _number(values, d + "samples", integer=True, positive=True)
    Nd = _number(values, d + "N", integer=True, positive=True)
    if Nd % 2 or Nd < 4:
        raise ConfigValidationError("diagnose.N must be even and at least 4")
    _number(values, d + "M", integer=True, lo=7)
    _number(values, d + "span", positive=True)
    _number(values, d + "eps", lo=0.0, hi=0.5)
    _number(values, d + "k", nonneg=True)
    _number(values, d + "s", nonneg=True)
    _number(values, d + "T", lo=0.0, hi=1.0)
    b = _number(values, d + "b", lo=-0.5, hi=0.5)
    bp = _number(values, d + "bprime", lo=-0.5, hi=0.5)
    if bp > b:
        raise ConfigValidationError("diagnose.bprime must not exceed diagnose.b")
    _number(values, d + "strichartz_T", positive=True)
    _number(values, d + "scan_nmax", integer=True, nonneg=True)
    _number(values, d + "scan_points_per_side", integer=True, positive=True)
    mus = values["diagnose"]["mu_values"]
    if not isinstance(mus, list) or not all(isinstance(m, (int, float)) and not isinstance(m, bool) for m in mus):
        raise ConfigValidationError("diagnose.mu_values must be a list of numbers")
    if not isinstance(values["output"]["compact_controls"], bool):
        raise ConfigValidationError("output.compact_controls must be true or false")


def build_config(data: dict | None = None, overrides=(), command: str | None = None, seed: int | None = None) -> ScenarioConfig:
    values = _merge(DEFAULTS, data or {})
    for item in overrides:
        values = _merge(DEFAULTS, apply_override(values, item))
    if command is not None:
        values["command"] = command
    if seed is not None:
        values["seed"] = seed
    validate(values)
    return ScenarioConfig(values["command"], int(values["seed"]), values)
