"""Versioned JSON experiment configs and exact gain literals."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema

from ..numerics import QuadField, QuadFieldElement, RandomSource

CONFIG_VERSION = 1

SCENARIOS = (
    "x-channel",
    "gic-k",
    "gic3-asymmetric",
    "gic3-standardize",
    "symmetric-rational",
    "symmetric-irrational",
    "gamma-check",
    "khintchine",
    "gain-scan",
)
SWEEP_SCENARIOS = ("x-channel", "gic-k", "gic3-asymmetric", "symmetric-rational", "symmetric-irrational")

_rational = {"oneOf": [{"type": "integer"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}
_gain = {
    "oneOf": [
        _rational,
        {"type": "number"},
        {
            "type": "object",
            "required": ["field", "coords"],
            "additionalProperties": False,
            "properties": {
                "field": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
                "coords": {"type": "array", "items": _rational, "minItems": 4, "maxItems": 4},
            },
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["version", "scenario", "sigma2", "seed"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "gains": {
            "oneOf": [
                {"type": "array", "items": {"type": "array", "items": _gain, "minItems": 1}, "minItems": 1},
                {"type": "string", "pattern": r"^random-uniform\[[-+0-9.eE]+,[-+0-9.eE]+\]$"},
            ]
        },
        "K": {"type": "integer", "minimum": 2},
        "h": _gain,
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
        "P": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "P_max": {"type": "number", "exclusiveMinimum": 0},
        "sigma2": {"type": "number", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "caps": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tuples": {"type": "integer", "minimum": 1}},
        },
        "out": {"type": "string"},
        "m_min": {"type": "integer", "minimum": 2},
        "pe_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_nm": {"type": "integer", "minimum": 2},
        "L_max": {"type": "integer", "minimum": 1},
        "alpha": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
        "random_alpha": {"type": "integer", "minimum": 0},
        "dim": {"type": "integer", "minimum": 1},
        "Qmax": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "farey_order": {"type": "integer", "minimum": 1},
        "irrationals": {"type": "array", "items": {"type": "integer", "minimum": 2}},
        "measure": {"type": "boolean"},
    },
}

DEFAULTS = {
    "epsilon": 0.1,
    "trials": 10**5,
    "caps": {"tuples": 10**7},
    "out": "out",
    "m_min": 20,
    "pe_threshold": 1e-2,
    "max_nm": 12,
    "L_max": 3,
    "random_alpha": 0,
    "dim": 2,
    "Qmax": [64, 512],
    "farey_order": 8,
    "irrationals": [2, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 22, 23, 26, 29, 30, 31, 33],
    "measure": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: dict
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def get(self, name, default=None):
        return self.values.get(name, default)

    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def validate(raw: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {e.message}") from None
    vals = {**DEFAULTS, **raw}
    P = vals.get("P")
    if P is not None and any(b <= a for a, b in zip(P, P[1:])):
        raise ConfigError("P must be strictly increasing (no duplicates)")
    if vals["scenario"] in ("x-channel", "gic-k", "gic3-asymmetric", "gic3-standardize") and "gains" not in vals:
        raise ConfigError(f"scenario {vals['scenario']} needs 'gains'")
    if vals["scenario"] in ("symmetric-rational", "symmetric-irrational") and "h" not in vals:
        raise ConfigError(f"scenario {vals['scenario']} needs 'h'")
    if vals["scenario"] in ("x-channel", "gic-k", "gic3-asymmetric") and P is None:
        raise ConfigError(f"scenario {vals['scenario']} needs 'P'")
    return ExperimentConfig(raw, vals)


def load_config(path: str | Path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["out"] = out
    return validate(raw)


# --------------------------------------------------------------------------
# gain literals
# --------------------------------------------------------------------------


def parse_gain(g):
    """Exact gain from an integer, "n/d" string or {"field": [d1, d2], "coords": [...]}; floats stay numeric."""
    if isinstance(g, bool):
        raise ConfigError("boolean is not a gain")
    if isinstance(g, int):
        return Fraction(g)
    if isinstance(g, str):
        return Fraction(g)
    if isinstance(g, float):
        return g
    if isinstance(g, dict):
        d1, d2 = g["field"]
        return QuadField(d1, d2)(*(Fraction(c) for c in g["coords"]))
    raise ConfigError(f"cannot parse gain {g!r}")


def _unify(gains):
    """Lift plain rationals into the field used by any field-valued gain."""
    fields = {x.field for x in gains if isinstance(x, QuadFieldElement)}
    if len(fields) > 1:
        raise ConfigError("gains use more than one field")
    if not fields:
        return gains
    fld = fields.pop()
    return [fld.rational(x) if isinstance(x, Fraction) else x for x in gains]


_RANDOM = re.compile(r"^random-uniform\[([-+0-9.eE]+),([-+0-9.eE]+)\]$")


def parse_gain_matrix(spec, seed: int, K: int | None = None) -> tuple[tuple, ...]:
    if isinstance(spec, str):
        lo, hi = (float(v) for v in _RANDOM.match(spec).groups())
        if not 0 < lo < hi:
            raise ConfigError("random gain range must satisfy 0 < lo < hi")
        if K is None:
            raise ConfigError("random gains need 'K'")
        rng = RandomSource(seed, stream=2**31 - 1)
        vals = rng.uniform(lo, hi, (K, K))
        return tuple(tuple(float(v) for v in row) for row in vals)
    flat = [parse_gain(g) for row in spec for g in row]
    if any(isinstance(x, float) for x in flat) and not all(isinstance(x, float) for x in flat):
        raise ConfigError("mix of float and exact gains; write exact gains for every entry")
    flat = _unify(flat)
    n = len(spec[0])
    if any(len(r) != n for r in spec):
        raise ConfigError("gain matrix rows differ in length")
    return tuple(tuple(flat[i * n:(i + 1) * n]) for i in range(len(spec)))


def format_gain(g) -> str:
    if isinstance(g, QuadFieldElement):
        d1, d2 = g.field.d1, g.field.d2
        names = ("", f"sqrt{d1}", f"sqrt{d2}", f"sqrt{d1 * d2}")
        parts = []
        for c, n in zip(g.coords, names):
            if c == 0:
                continue
            if not n:
                parts.append(str(c))
            elif c == 1:
                parts.append(n)
            elif c == -1:
                parts.append("-" + n)
            else:
                parts.append(f"{c}*{n}")
        return "+".join(parts).replace("+-", "-") or "0"
    if isinstance(g, Fraction):
        return str(g)
    return repr(float(g))
