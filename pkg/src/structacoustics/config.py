"""Run configuration: JSON schema, defaults, dotted overrides and scenario presets."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Iterable, Optional

import jsonschema


class ConfigError(ValueError):
    """Schema or parse failure; the message names the offending location."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NULLABLE_POS = {"type": ["number", "null"], "exclusiveMinimum": 0}

_DAMPING = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"near_exp": _NUM, "far_exp": _NUM, "coeff": _NUM},
}

SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["reduced-2D", "full-3D"]},
                "dims": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": _NUM,
                "q": _NUM,
                "source_scale_f": _NUM,
                "source_scale_h": _NUM,
                "damping_u": _DAMPING,
                "damping_w": _DAMPING,
            },
        },
        "well": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "restarts": {"type": "integer", "minimum": 2},
                "n_directions": {"type": "integer", "minimum": 1},
                "synthetic": {
                    "type": ["object", "null"],
                    "additionalProperties": False,
                    "required": ["M", "K1", "K2"],
                    "properties": {"M": _POS, "K1": _POS, "K2": _POS},
                },
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "shape": {"enum": ["gaussian-bump", "single-mode", "file"]},
                "amplitude": {"type": "number", "minimum": 0},
                "auto_scale": {"type": "boolean"},
                "fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.9},
                "width": _POS,
                "center": {"type": "array", "items": _NUM},
                "mode": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "w_weight": {"type": "number", "minimum": 0},
                "path": {"type": ["string", "null"]},
            },
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _NULLABLE_POS,
                "t_end": {"type": "number", "minimum": 0},
                "output_dt": _NULLABLE_POS,
                "stride": {"type": ["integer", "null"], "minimum": 1},
                "residual_tol": _POS,
            },
        },
        "decay": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "C_tilde": _NULLABLE_POS,
                "window_start": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ledger": {"type": "string"},
                "report": {"type": "string"},
                "snapshots": {"type": ["string", "null"]},
                "snapshot_every": {"type": "integer", "minimum": 0},
                "plot_script": {"type": ["string", "null"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["key", "values"],
            "properties": {
                "key": {"type": "string"},
                "values": {"type": "array", "minItems": 1},
                "command": {"enum": ["simulate", "decay"]},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
    },
}

DEFAULTS: dict = {
    "geometry": {"mode": "reduced-2D", "dims": [64, 64]},
    "params": {
        "p": 2.0,
        "q": 2.0,
        "source_scale_f": 1.0,
        "source_scale_h": 1.0,
        "damping_u": {"near_exp": 1.0, "far_exp": 1.0, "coeff": 1.0},
        "damping_w": {"near_exp": 1.0, "far_exp": 1.0, "coeff": 1.0},
    },
    "well": {"delta_fraction": 0.05, "restarts": 16, "n_directions": 64, "synthetic": None},
    "initial": {
        "shape": "gaussian-bump",
        "amplitude": 1.0,
        "auto_scale": True,
        "fraction": 0.4,
        "width": 0.15,
        "center": [0.3, 0.5],
        "mode": [1, 1],
        "w_weight": 1.0,
        "path": None,
    },
    "time": {"dt": None, "t_end": 10.0, "output_dt": None, "stride": None, "residual_tol": 1e-3},
    "decay": {"C_tilde": None, "window_start": 0.2},
    "outputs": {
        "ledger": "ledger.csv",
        "report": "report.json",
        "snapshots": "snapshots.bin",
        "snapshot_every": 0,
        "plot_script": "plot_ledger.py",
    },
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply ``"a.b.c=value"``; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    set_path(cfg, key.strip(), _parse_value(text.strip()))
    return cfg


def set_path(cfg: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} crosses a non-object value")
    node[parts[-1]] = value


def validate_schema(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def resolve(raw: dict, overrides: Iterable[str] = (), seed: Optional[int] = None) -> dict:
    """Apply overrides and seed, check the schema, fill defaults."""
    raw = copy.deepcopy(raw)
    for ov in overrides:
        apply_override(raw, ov)
    if seed is not None:
        raw["seed"] = int(seed)
    validate_schema(raw)
    cfg = _merge(DEFAULTS, raw)
    dims = cfg["geometry"]["dims"]
    if len(set(dims)) != 1:
        raise ConfigError(f"config error at geometry/dims: grid must have equal node counts per axis, got {dims}")
    expected = 2 if cfg["geometry"]["mode"] == "reduced-2D" else 3
    if len(dims) not in (1, expected):
        raise ConfigError(f"config error at geometry/dims: {cfg['geometry']['mode']} needs {expected} entries")
    return cfg


def load_config(path: str | Path, overrides: Iterable[str] = (), seed: Optional[int] = None) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return resolve(raw, overrides, seed)


def scenario(name: str, seed: int = 0) -> dict:
    """Raw config of a reference scenario: ``"A"`` (quadratic sources, linear
    damping) or ``"B"`` (cubic sources, cubic damping)."""
    name = name.upper()
    if name == "A":
        return {"seed": seed, "params": {"p": 2.0, "q": 2.0}, "time": {"t_end": 10.0}}
    if name == "B":
        cubic = {"near_exp": 3.0, "far_exp": 3.0, "coeff": 1.0}
        return {
            "seed": seed,
            "params": {"p": 3.0, "q": 3.0, "damping_u": dict(cubic), "damping_w": dict(cubic)},
            "time": {"t_end": 50.0},
        }
    raise ValueError(f"unknown scenario {name!r}")
