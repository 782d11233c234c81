"""Experiment configuration: JSON documents validated against a schema."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

import jsonschema

from .params import N0_UNITS, SimulationParams

__all__ = ["ConfigError", "SCHEMA", "DEFAULTS", "load_config", "resolve_config", "config_hash",
           "build_params", "OUTPUT_ENV"]

OUTPUT_ENV = "MULTIHARMONIC_OUTPUT_DIR"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "multiharmonic experiment",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "c": _pos, "b": _pos, "rho0": _pos, "beta_a": _num, "R0": _pos,
                "n0": {"type": "number", "minimum": 0}, "n0_units": {"enum": sorted(N0_UNITS)},
                "P0": _pos, "kappa": _pos, "nu": {"type": "number", "minimum": 0},
                "beta_bc": _pos, "gamma_bc": _pos, "omega": _pos,
            },
        },
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radius": _pos,
                "h_target": _pos,
                "path": {"type": "string"},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "formulation": {"enum": ["real-full", "real-v0zero", "complex-direct",
                                         "complex-linearized", "two-harmonic"]},
                "N_max": {"type": "integer", "minimum": 1, "maximum": 64},
                "a": _num,
                "r_delta": _pos,
                "source_position": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "polish": {"type": "integer", "minimum": 0},
                "n_samples": {"type": "integer", "minimum": 4},
            },
        },
        "study": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h_list": {"type": "array", "items": _pos, "minItems": 1},
                "N_list": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 64},
                           "minItems": 1},
                "real_formulation": {"enum": ["real-full", "real-v0zero"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "csv": {"type": "boolean"},
                "vtk": {"type": "boolean"},
                "timing": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer"},
    },
}

DEFAULTS = {
    "params": {"n0_units": "1/m3"},
    "mesh": {"radius": 0.2, "h_target": 0.003},
    "run": {"formulation": "complex-linearized", "N_max": 5, "a": 1e5, "r_delta": 0.004,
            "source_position": [0.0, 0.0], "polish": 0, "n_samples": 128},
    "study": {"h_list": [0.025, 0.0125, 0.00625, 0.003125], "N_list": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
              "real_formulation": "real-v0zero"},
    "output": {"directory": "results", "csv": True, "vtk": False, "timing": False},
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at '{where}': {exc.message}") from None


def resolve_config(doc: dict | None = None, base_dir=None) -> dict:
    """Validate ``doc``, fill in defaults and apply the output-directory override."""
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _validate(doc)
    mesh_given = doc.get("mesh", {})
    if "path" in mesh_given and ("h_target" in mesh_given or "radius" in mesh_given):
        raise ConfigError("invalid config at 'mesh': give either 'path' or 'radius'/'h_target', not both")
    cfg = _merge(DEFAULTS, doc)
    if "path" in mesh_given:
        cfg["mesh"] = {"path": mesh_given["path"]}
        path = Path(mesh_given["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError(f"invalid config at 'mesh/path': file {str(path)!r} not found")
        cfg["mesh"]["path"] = str(path)
    if os.environ.get(OUTPUT_ENV):
        cfg["output"]["directory"] = os.environ[OUTPUT_ENV]
    _validate(cfg)
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    return resolve_config(doc, base_dir=path.parent)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON of the physics-relevant config blocks."""
    relevant = {k: cfg[k] for k in ("params", "mesh", "run", "study", "seed") if k in cfg}
    blob = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_params(cfg: dict, **overrides) -> SimulationParams:
    block = dict(cfg.get("params", {}))
    units = block.pop("n0_units", "1/m3")
    if "n0" in block:
        block["n0"] = block["n0"] * N0_UNITS[units]
    block.update(overrides)
    try:
        return SimulationParams(**block)
    except ValueError as exc:
        raise ConfigError(f"invalid config at 'params': {exc}") from None
