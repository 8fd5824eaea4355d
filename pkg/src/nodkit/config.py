"""Strict JSON run configuration."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema

METHODS = ("nod", "nod_bc", "nag", "forward", "extragradient")
KINDS = ("sin_coupling", "quadratic_skew", "pure_convex", "bilinear")

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem"],
    "properties": {
        "problem": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(KINDS)},
                "A": _matrix, "K": _matrix, "b": _vector,
                "omega": _number, "dim": {"type": "integer", "minimum": 2},
                "A_g": _matrix, "b_g": _vector, "A_h": _matrix, "b_h": _vector, "M": _matrix,
                "d_x": {"type": "integer", "minimum": 1}, "d_y": {"type": "integer", "minimum": 1},
                "mu_x": _number, "mu_y": _number, "L_x": _number, "L_y": _number,
                "L_xy": _number, "seed": {"type": "integer"},
                "L_S_claim": _number, "L_phi_claim": _number, "mu_claim": _number,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": list(METHODS)},
                "eta": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 0},
                "tol": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "z0": _vector,
            },
        },
        "ode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "z0": _vector,
                "v0": _vector,
            },
        },
        "probes": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "half_width": {"type": "number", "exclusiveMinimum": 0},
                "grid_num": {"type": "integer", "minimum": 2},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trace_path": {"type": ["string", "null"]},
                "report_path": {"type": ["string", "null"]},
            },
        },
        "seed": {"type": "integer"},
    },
}

DEFAULTS = {
    "solver": {"method": "nod", "eta": None, "max_iters": 1000, "tol": 1e-10},
    "ode": {"t_end": 20.0, "dt": None},
    "probes": {"n": 10_000, "half_width": 10.0, "grid_num": 201},
    "outputs": {"trace_path": None, "report_path": None},
    "seed": 0,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    raw: dict

    @property
    def problem(self) -> dict:
        return self.raw["problem"]

    @property
    def solver(self) -> dict:
        return self.raw["solver"]

    @property
    def ode(self) -> dict:
        return self.raw["ode"]

    @property
    def probes(self) -> dict:
        return self.raw["probes"]

    @property
    def outputs(self) -> dict:
        return self.raw["outputs"]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    def dumps(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def _error_path(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        return f"{path + ': ' if path else ''}{err.message}"
    return f"{path or '<root>'}: {err.message}"


def resolve(raw: dict, overrides: Optional[dict] = None) -> RunConfig:
    """Validate ``raw`` against the strict schema, apply CLI overrides and defaults."""
    raw = copy.deepcopy(raw)
    for section, values in (overrides or {}).items():
        if section == "seed":
            raw["seed"] = values
            continue
        raw.setdefault(section, {}).update(values)
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(_error_path(err)) from None
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            merged = dict(default)
            merged.update(raw.get(key, {}))
            raw[key] = merged
        else:
            raw.setdefault(key, default)
    if raw["problem"]["kind"] == "bilinear" and "seed" not in raw["problem"] and "A_g" not in raw["problem"]:
        raw["problem"]["seed"] = raw["seed"]
    if raw["solver"]["method"] == "nod_bc" and raw["problem"]["kind"] != "bilinear":
        raise ConfigError("solver.method: nod_bc requires a bilinear problem")
    return RunConfig(raw)


def load(path: str | Path, overrides: Optional[dict] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return resolve(raw, overrides)
