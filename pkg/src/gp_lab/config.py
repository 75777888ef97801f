"""Run-configuration schema: validation with defaults and unknown-key rejection."""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .grids import CartesianGrid, RadialGrid
from .model import Nonlinearity, Potential, build_double_well, radial_profile, zero_potential

_SCHEMA = {
    "potential": {
        "kind": (str, None),
        "m": (float, None),
        "q": (float, None),
        "lambda_g": (float, None),
        "profile": {
            "gaussians": (list, ()),
            "shells": (list, ()),
            "poly": (list, (0.0, 0.0)),
        },
    },
    "nonlinearity": {"g": (float, None)},
    "grid": {
        "radial": {"r_max": (float, None), "n": (int, None)},
        "box": {"L": (float, None), "n": (int, None)},
    },
    "spectrum": {"k_eigs": (int, 4), "tol": (float, 1e-9), "l_max": (int, 2), "gap_tol": (float, 1e-6)},
    "threshold": {"eps_ladder": (list, (1e-2, 1e-3, 1e-4)), "resolutions": (list, ((60.0, 480),)), "floor_coef": (float, 10.0)},
    "branch": {
        "lambda_range": (list, None),
        "lambda_offsets": (list, None),
        "steps": (int, 25),
        "newton_tol": (float, 1e-10),
    },
    "linearize": {"sample_offset": (float, None), "sample_lambda": (float, None), "tol": (float, 1e-9)},
    "fgr": {
        "eps_ladder": (list, (0.02, 0.01, 0.005)),
        "psd_tol": (float, 1e-8),
        "gamma_tol": (float, 0.05),
        "n_psd_samples": (int, 1000),
    },
    "normal_form": {
        "z0": (list, ((0.05, 0.0), (0.0, 0.0), (0.0, 0.0))),
        "gamma0": (float, 0.0),
        "T": (float, 2000.0),
        "dt": (float, 0.02),
    },
    "simulate": {
        "lambda0": (float, None),
        "lambda0_offset": (float, None),
        "z0": (list, ((0.05, 0.0), (0.0, 0.0), (0.0, 0.0))),
        "T": (float, 250.0),
        "dt": (float, 0.02),
        "samples": (int, 160),
        "nu": (float, 4.0),
        "l_max": (int, 6),
        "eps0": (float, 0.25),
        "guard_safety": (float, 1.2),
        "checkpoint_every": (int, 0),
    },
    "seeds": {"master": (int, 12345)},
    "output": {"dir": (str, "out"), "figures": (bool, True)},
}


def _validate(section, schema, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    out = {}
    for key, val in data.items():
        if key not in schema:
            raise ConfigError(f"{path}{key}: unknown key")
        spec = schema[key]
        if isinstance(spec, dict):
            out[key] = _validate(key, spec, val, f"{path}{key}.")
        else:
            typ, _default = spec
            if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
                out[key] = float(val)
            elif typ is int and isinstance(val, int) and not isinstance(val, bool):
                out[key] = int(val)
            elif typ is bool and isinstance(val, bool):
                out[key] = val
            elif typ is str and isinstance(val, str):
                out[key] = val
            elif typ is list and isinstance(val, (list, tuple)):
                out[key] = val
            else:
                raise ConfigError(f"{path}{key}: expected {typ.__name__}, got {type(val).__name__}")
    for key, spec in schema.items():
        if key in out:
            continue
        if isinstance(spec, dict):
            out[key] = _validate(key, spec, {}, f"{path}{key}.")
        else:
            out[key] = spec[1]
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return validate_config(raw)


def validate_config(raw: dict) -> dict:
    cfg = _validate("config", _SCHEMA, raw, "")
    _check_physics(cfg)
    return cfg


def _check_physics(cfg):
    pot = cfg["potential"]
    if pot["kind"] is not None and pot["kind"] not in ("zero", "radial_analytic", "double_well"):
        raise ConfigError(f"potential.kind: unknown kind {pot['kind']!r}")
    if pot["kind"] == "double_well":
        for key in ("m", "q", "lambda_g"):
            if pot[key] is None:
                raise ConfigError(f"potential.{key}: required for the double well")
        if pot["m"] < 0 or pot["q"] <= 0 or pot["lambda_g"] <= 0:
            raise ConfigError("potential: double-well parameters out of range")
    g = cfg["grid"]
    if g["radial"]["n"] is not None:
        if g["radial"]["n"] < 16 or g["radial"]["r_max"] is None or g["radial"]["r_max"] <= 0:
            raise ConfigError("grid.radial: need r_max > 0 and n >= 16")
    if g["box"]["n"] is not None:
        n = g["box"]["n"]
        if n < 4 or (n & (n - 1)) != 0 or g["box"]["L"] is None or g["box"]["L"] <= 0:
            raise ConfigError("grid.box: need L > 0 and n a power of two")
    br = cfg["branch"]
    if br["lambda_range"] is not None and br["lambda_offsets"] is not None:
        raise ConfigError("branch: give lambda_range or lambda_offsets, not both")
    if br["steps"] < 2:
        raise ConfigError("branch.steps: need at least 2")
    for lad in (cfg["fgr"]["eps_ladder"], cfg["threshold"]["eps_ladder"]):
        if any(not isinstance(e, (int, float)) or e <= 0 for e in lad):
            raise ConfigError("eps_ladder entries must be positive numbers")
    sim = cfg["simulate"]
    if sim["dt"] <= 0 or sim["T"] <= 0:
        raise ConfigError("simulate: T and dt must be positive")


def potential_from_config(cfg) -> Potential:
    pot = cfg["potential"]
    kind = pot["kind"] or "zero"
    if kind == "zero":
        return zero_potential()
    if kind == "double_well":
        return build_double_well(pot["m"], pot["q"], pot["lambda_g"])
    prof = pot["profile"]
    return radial_profile(
        gaussians=prof["gaussians"], shells=prof["shells"], poly=tuple(prof["poly"])
    )


def nonlinearity_from_config(cfg) -> Nonlinearity:
    g = cfg["nonlinearity"]["g"]
    if g is None:
        raise ConfigError("nonlinearity.g is required")
    return Nonlinearity(g=g)


def radial_grid_from_config(cfg) -> RadialGrid:
    g = cfg["grid"]["radial"]
    if g["n"] is None:
        raise ConfigError("grid.radial is required for this pipeline")
    return RadialGrid(g["r_max"], g["n"])


def box_grid_from_config(cfg) -> CartesianGrid:
    g = cfg["grid"]["box"]
    if g["n"] is None:
        raise ConfigError("grid.box is required for this pipeline")
    return CartesianGrid(g["L"], g["n"])


def z0_from_config(entries) -> np.ndarray:
    return np.array([complex(float(p[0]), float(p[1])) for p in entries])
