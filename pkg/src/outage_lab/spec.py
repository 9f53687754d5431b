"""Experiment spec documents (JSON) and their conversion to SimConfig."""

from __future__ import annotations

import json
import math

import jsonschema

from outage_lab.channel import ChannelParams
from outage_lab.constellation import build_constellation
from outage_lab.errors import OutageLabError, SpecError
from outage_lab.power import PowerPolicy
from outage_lab.rotation import RotationScheme
from outage_lab.sim import SimConfig

_NUM_OR_INF = {"oneOf": [{"type": "number"}, {"enum": ["inf", "Infinity"]}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["channel", "constellation", "rate_R", "policy", "snr_grid_db", "n_samples", "seed"],
    "properties": {
        "label": {"type": "string"},
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["B"],
            "properties": {
                "B": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "d_e": {"type": "number", "minimum": 0},
                "L": {"type": "integer", "minimum": 1},
            },
        },
        "constellation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "M"],
            "properties": {
                "kind": {"type": "string"},
                "M": {"type": "integer", "minimum": 1},
            },
        },
        "rate_R": {"type": "number", "exclusiveMinimum": 0},
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["Uniform", "TruncatedInversion"]},
                "d_peak": _NUM_OR_INF,
                "scale": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]},
                "alpha_cap": {"type": "number", "minimum": 0},
            },
        },
        "rotation": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["N"],
                    "properties": {
                        "N": {"type": "integer", "minimum": 1},
                        "family": {"enum": ["identity", "cyclotomic"]},
                    },
                },
            ]
        },
        "snr_grid_db": {"type": "array", "items": {"type": "number"}},
        "n_samples": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "min_events": {"type": "integer", "minimum": 1},
        "n_pilot": {"type": "integer", "minimum": 1},
        "mi_table": {"type": "string"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "estimates_csv": {"type": "string"},
                "summary_csv": {"type": "string"},
            },
        },
    },
}


def validate(doc):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SpecError(f"{path}: {exc.message}") from None


def to_config(doc):
    """Validate ``doc`` and build the SimConfig it describes."""
    validate(doc)
    ch = doc["channel"]
    params = ChannelParams(ch["B"], ch.get("m", 1), ch.get("d_e", 0.0), ch.get("L", 1))
    try:
        c = build_constellation(doc["constellation"]["kind"], doc["constellation"]["M"])
        pol = doc["policy"]
        dp = pol.get("d_peak", "inf")
        dp = math.inf if dp in ("inf", "Infinity") else float(dp)
        scale = pol.get("scale", 1.0)
        policy = PowerPolicy(pol["kind"], dp, params.m, params.d_e, scale, pol.get("alpha_cap"))
        rot = doc.get("rotation")
        rotation = None
        if rot is not None and rot["N"] > 1:
            rotation = RotationScheme.build(rot.get("family", "cyclotomic"), rot["N"], params.B)
        return SimConfig(
            params,
            c,
            float(doc["rate_R"]),
            policy,
            tuple(doc["snr_grid_db"]),
            doc["n_samples"],
            doc["seed"],
            rotation,
            doc.get("min_events", 100),
            doc.get("n_pilot", 1_000_000),
            doc.get("label", ""),
        )
    except SpecError:
        raise
    except (OutageLabError, ValueError) as exc:
        raise SpecError(str(exc)) from None


def load(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
