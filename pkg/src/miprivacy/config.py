"""Experiment configuration: JSON schema, loading and normalization.

Example::

    {
      "hypotheses": [[0.5, 0.5], [0.45, 0.55]],
      "budgets": {"fraction": 0.001},
      "utility": "kl",
      "grid": {"resolution": 0.001, "refine_rounds": 3},
      "sweep": {"logspace": {"start": 1e-5, "stop": 0.2, "num": 12}},
      "verify": {"n": [10000], "delta": [0.05, 0.2], "tolerance": 0.15},
      "seed": 0
    }

``hypotheses`` may also be an object mapping names to hypothesis lists;
``compare`` then writes one CSV per entry.
"""

import json

import jsonschema
import numpy as np

from .exceptions import ValidationError
from .oracle import GridSpec, parse_utility

MAX_FRACTION = 0.2

_prob_vector = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}
_hyp_list = {"type": "array", "items": _prob_vector, "minItems": 2}
_matrix = {"type": "array", "items": _prob_vector, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "hypotheses": {
            "oneOf": [
                _hyp_list,
                {"type": "object", "additionalProperties": _hyp_list, "minProperties": 1},
            ]
        },
        "budgets": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": MAX_FRACTION},
                "bits": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            },
            "oneOf": [{"required": ["fraction"]}, {"required": ["bits"]}],
        },
        "reference": _prob_vector,
        "utility": {"type": "string", "pattern": r"^(kl|renyi:[0-9.eE+-]+)$"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "refine_rounds": {"type": "integer", "minimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fractions": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0, "maximum": MAX_FRACTION},
                },
                "logspace": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "num"],
                    "properties": {
                        "start": {"type": "number", "exclusiveMinimum": 0, "maximum": MAX_FRACTION},
                        "stop": {"type": "number", "exclusiveMinimum": 0, "maximum": MAX_FRACTION},
                        "num": {"type": "integer", "minimum": 0},
                    },
                },
            },
            "oneOf": [{"required": ["fractions"]}, {"required": ["logspace"]}],
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 100000}, "minItems": 1},
                "delta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                          "minItems": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "trials": {"type": "integer", "minimum": 1},
                "mechanism": _matrix,
            },
        },
        "measure": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p"],
            "properties": {
                "p": _prob_vector,
                "q": _prob_vector,
                "W": _matrix,
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "output": {"type": "string"},
    },
}


def validate_config(cfg):
    """Raise :class:`ValidationError` naming the first schema violation."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from None
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return validate_config(cfg)


def hypothesis_sets(cfg):
    """Named hypothesis lists, in file order (a bare list is named ``"problem"``)."""
    h = cfg.get("hypotheses")
    if h is None:
        raise ValidationError("config needs 'hypotheses'")
    if isinstance(h, dict):
        return [(name, np.asarray(v, dtype=float)) for name, v in h.items()]
    return [("problem", np.asarray(h, dtype=float))]


def sweep_fractions(cfg):
    sw = cfg.get("sweep")
    if sw is None:
        return []
    if "fractions" in sw:
        return [float(f) for f in sw["fractions"]]
    ls = sw["logspace"]
    return [float(f) for f in np.geomspace(ls["start"], ls["stop"], ls["num"])] if ls["num"] else []


def grid_spec(cfg, step=None):
    g = dict(cfg.get("grid", {}))
    if step is not None:
        g["resolution"] = step
    return GridSpec(**g)


def utility_of(cfg, override=None):
    return parse_utility(override if override is not None else cfg.get("utility", "kl"))
