"""JSON experiment configuration: schema, semantic checks, and object builders."""
from __future__ import annotations

import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .flows import cellular_flow, fourier_flow, shear_flow, zero_flow
from .speed import ReactionSpec, fisher_kpp
from .torus import make_grid

MODES = ("diffusivity", "speed", "limits", "simulate", "validate", "reproduce-all")

_positive = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["mode"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "flow": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["shear", "cellular", "fourier", "zero"]},
                "dim": {"enum": [2, 3]},
                "resolution": {"type": "integer", "minimum": 8, "maximum": 4096},
                "axis": {"type": "integer", "minimum": 0},
                "modes": {"type": "array"},
            },
        },
        "direction": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3},
        "amplitudes": {
            "oneOf": [
                {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                {
                    "type": "object",
                    "required": ["lo", "hi", "num"],
                    "additionalProperties": False,
                    "properties": {
                        "lo": _positive,
                        "hi": _positive,
                        "num": {"type": "integer", "minimum": 1},
                        "spacing": {"enum": ["linear", "log"]},
                    },
                },
            ]
        },
        "reaction": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["fisher_kpp"]},
                "fprime0": _positive,
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"cell": _positive, "eigen": _positive, "lambda": _positive},
        },
        "lambda_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "length_periods": {"type": "integer", "minimum": 16},
                "resolution": {"type": "integer", "minimum": 8},
                "t_final": _positive,
                "window_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "acceptance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fast": {"type": "boolean"},
                "resolution": {"type": "integer", "minimum": 8},
            },
        },
        "output_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
}

SWEEP_MODES = ("diffusivity", "speed", "simulate")


class ConfigError(ValueError):
    """Schema or semantic problem; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    @property
    def tolerances(self) -> dict:
        t = {"cell": 1e-10, "eigen": 1e-9, "lambda": 1e-6}
        t.update(self.raw.get("tolerances", {}))
        return t

    def amplitudes(self) -> list[float]:
        return amplitude_list(self.raw.get("amplitudes", []))

    def direction(self, dim: int) -> tuple[float, ...]:
        e = self.raw.get("direction")
        if e is None:
            return (1.0,) + (0.0,) * (dim - 1)
        return tuple(float(x) for x in e)

    def flow(self):
        return build_flow(self.raw.get("flow", {"type": "zero"}))

    def reaction(self) -> ReactionSpec:
        r = self.raw.get("reaction", {})
        return fisher_kpp(float(r.get("fprime0", 1.0)))


def amplitude_list(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(a) for a in spec]
    lo, hi, num = float(spec["lo"]), float(spec["hi"]), int(spec["num"])
    if spec.get("spacing", "log") == "log":
        return [float(a) for a in np.geomspace(lo, hi, num)]
    return [float(a) for a in np.linspace(lo, hi, num)]


def build_flow(spec: dict):
    dim = int(spec.get("dim", 2))
    grid = make_grid(dim, int(spec.get("resolution", 64)))
    kind = spec["type"]
    if kind == "zero":
        return zero_flow(grid)
    if kind == "cellular":
        if dim != 2:
            raise ConfigError("flow.dim", "the cellular flow is two-dimensional")
        return cellular_flow(grid)
    if kind == "shear":
        modes = spec.get("modes") or [{"wavevector": [1] * (dim - 1), "amplitude": 1.0}]
        return shear_flow(grid, modes, axis=int(spec.get("axis", 0)))
    if not spec.get("modes"):
        raise ConfigError("flow.modes", "a fourier flow needs at least one mode")
    return fourier_flow(grid, spec["modes"])


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate_config(raw) -> ExperimentConfig:
    """Schema check followed by semantic checks; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(_path(err), err.message)
    amps = raw.get("amplitudes")
    if isinstance(amps, dict) and amps["lo"] > amps["hi"]:
        raise ConfigError("amplitudes.lo", f"lo={amps['lo']} exceeds hi={amps['hi']}")
    if raw["mode"] in SWEEP_MODES and not amps:
        raise ConfigError("amplitudes", f"mode {raw['mode']} needs a non-empty amplitude list")
    if isinstance(amps, list) and raw["mode"] in ("diffusivity", "speed"):
        if any(a <= 0 for a in amps):
            raise ConfigError("amplitudes", "amplitudes must be positive")
        if any(b <= a for a, b in zip(amps, amps[1:])):
            raise ConfigError("amplitudes", "amplitudes must be strictly increasing")
    cfg = ExperimentConfig(raw)
    if "flow" in raw:
        try:
            u = cfg.flow()
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as err:
            raise ConfigError("flow", str(err)) from err
        e = cfg.direction(u.dim)
        if len(e) != u.dim:
            raise ConfigError("direction", f"expected {u.dim} components, got {len(e)}")
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ConfigError("direction", "must be a unit vector")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate; unreadable files raise ``OSError``, bad JSON ``ConfigError``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<json>", f"line {err.lineno}: {err.msg}") from err
    return validate_config(raw)
