"""JSON run configuration: versioned schema, defaults, strict key checking.

A config is a nested mapping. Core blocks (``crystal``, ``pump``, ``grid``,
``calibration``) always have defaults; task blocks (``optimize``,
``cluster``, ``chirp_scan``, ``squeezing_scan``) get defaults once present.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "crystal": {
        "material": "BiBO",
        "length": 1.5e-3,
        "pump_wavelength": 397.5e-9,
        "theta": None,
    },
    "pump": {"fwhm": 3.54e-9, "phi2": 0.0},
    "grid": {"n_points": 500, "halfwidth_sigmas": 12.0},
    "shaper": None,
    "calibration": {"target_db": 7.0},
}

TASK_DEFAULTS = {
    "shaper": {"n_control": 32, "window_sigmas": 3.0, "u": "identity"},
    "optimize": {
        "fitness": {"kind": "gap_f2_bar"},
        "evo": {
            "sigma0": 0.3,
            "max_generations": 500,
            "population": None,
            "parents": None,
            "history_blend": 0.3,
            "amplitude_scale": 1.0,
            "phase_scale": 1.0,
        },
        "permutation": [0, 3, 1, 2],
    },
    "cluster": {
        "graph": {"n_nodes": 4, "edges": [[0, 1], [1, 2], [2, 3]]},
        "frexels": {
            "n_bands": 4,
            "red_wavelength": 808e-9,
            "center_wavelength": 795e-9,
            "fwhm": 10e-9,
            "edges": None,
        },
        "permutation": "search",
        "phase": {"n_scan": 720, "sweeps": 2, "n_starts": 24},
    },
    "chirp_scan": {
        "stretches": [1.0, 1.4, 1.8, 2.2, 2.6, 3.0, 3.4, 3.8, 4.2, 4.6],
        "top": 100,
        "near_max_fraction": 0.95,
    },
    "squeezing_scan": {
        "db_values": [float(v) for v in np.arange(0.0, 20.5, 1.0)],
        "permutation": [0, 3, 1, 2],
    },
}

# sub-blocks whose keys are free-form (validated by their own parsers)
_OPAQUE = {("optimize", "fitness"), ("cluster", "graph")}

# blocks each command needs in addition to the core ones
COMMAND_BLOCKS = {
    "phase-match": (),
    "supermodes": (),
    "chirp-scan": ("chirp_scan",),
    "optimize": ("optimize",),
    "cluster": ("cluster",),
    "squeezing-scan": ("squeezing_scan", "cluster"),
}


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError(f"{'.'.join(path) or 'config'} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        where = ".".join(path) or "top level"
        raise ConfigError(f"unknown config keys at {where}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        sub = defaults[key]
        if isinstance(sub, dict) and tuple(path + [key]) not in _OPAQUE and value is not None:
            out[key] = _merge(sub, value, path + [key])
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(raw=None):
    """Fill defaults into a raw config mapping and validate it.

    Raises:
        ConfigError: unknown keys, wrong schema version or unphysical values.
    """
    raw = {} if raw is None else dict(raw)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    schema = dict(DEFAULTS)
    for key in TASK_DEFAULTS:
        schema[key] = TASK_DEFAULTS[key]
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config keys at top level: {sorted(unknown)}")
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if isinstance(schema[key], dict) and value is not None:
            cfg[key] = _merge(schema[key], value, [key])
        else:
            cfg[key] = value
    validate(cfg)
    return cfg


def _positive(cfg, *path):
    node = cfg
    for p in path:
        node = node[p]
    try:
        ok = np.isfinite(node) and node > 0
    except TypeError:
        ok = False
    if not ok:
        raise ConfigError(f"{'.'.join(path)} must be a positive number, got {node!r}")


def validate(cfg):
    if cfg["crystal"]["material"] != "BiBO":
        raise ConfigError("only the BiBO dispersion model is available")
    _positive(cfg, "crystal", "length")
    _positive(cfg, "crystal", "pump_wavelength")
    theta = cfg["crystal"]["theta"]
    if theta is not None and not 0.0 <= theta <= np.pi:
        raise ConfigError("crystal.theta must lie in [0, pi]")
    _positive(cfg, "pump", "fwhm")
    if not np.isfinite(cfg["pump"]["phi2"]):
        raise ConfigError("pump.phi2 must be finite")
    n = cfg["grid"]["n_points"]
    if not isinstance(n, int) or n < 2:
        raise ConfigError("grid.n_points must be an integer >= 2")
    _positive(cfg, "grid", "halfwidth_sigmas")
    if not np.isfinite(cfg["calibration"]["target_db"]) or cfg["calibration"]["target_db"] < 0:
        raise ConfigError("calibration.target_db must be non-negative")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    shaper = cfg.get("shaper")
    if shaper is not None:
        if not isinstance(shaper["n_control"], int) or shaper["n_control"] < 2:
            raise ConfigError("shaper.n_control must be an integer >= 2")
        _positive(cfg, "shaper", "window_sigmas")
        u = shaper["u"]
        if u != "identity" and (not isinstance(u, list) or len(u) != 2 * shaper["n_control"]):
            raise ConfigError("shaper.u must be 'identity' or a list of 2 * n_control numbers")


def require(cfg, command):
    """Check that the task blocks needed by ``command`` are present."""
    missing = [b for b in COMMAND_BLOCKS[command] if b not in cfg]
    if missing:
        raise ConfigError(f"command {command!r} needs config block(s): {missing}")


def load(path):
    """Read a config file; a run manifest is accepted too (its ``config`` entry is used)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if isinstance(raw, dict) and {"command", "config"} <= set(raw):
        raw = raw["config"]
    return resolve(raw)
