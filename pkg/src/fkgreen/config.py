"""Experiment configuration: JSON schema, overrides, and compilation of the
potential section into the runtime objects.

A configuration is a single JSON document with top-level keys exactly one of
{"potential", "metric"} plus {"grids", "mc", "quadrature", "fits", "output"};
unknown keys are rejected with a message naming the offending field.
"""

from __future__ import annotations

import json
import os
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from .errors import FkgreenError
from .potentials import (
    COSMOLOGICAL,
    QUANTUM,
    DiagonalForm,
    IsotropicForm,
    MetricModel,
    PowerLawTerm,
    ScalarPotential,
    metric_to_potentials,
)


class ConfigError(FkgreenError):
    """Invalid configuration (schema, missing seed, bad override, ...)."""


_TERM_SCHEMA = {
    "type": "object",
    "properties": {
        "amplitude": {"type": "number", "minimum": 0},
        "exponent": {"type": "number", "exclusiveMinimum": -2},
        "center": {"type": "number"},
    },
    "required": ["amplitude", "exponent"],
    "additionalProperties": False,
}

_SCHEMA = {
    "type": "object",
    "properties": {
        "potential": {
            "type": "object",
            "properties": {
                "type": {"enum": ["isotropic", "diagonal"]},
                "d": {"type": "integer", "minimum": 1},
                "terms": {"type": "array", "items": _TERM_SCHEMA, "minItems": 1},
                "w_terms": {"type": "array", "items": _TERM_SCHEMA},
            },
            "required": ["type", "terms"],
            "additionalProperties": False,
        },
        "metric": {
            "type": "object",
            "properties": {
                "interpretation": {"enum": [COSMOLOGICAL, QUANTUM]},
                "alpha": {"type": "number"},
                "alphas": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 1,
                },
                "mass": {"type": "number", "minimum": 0},
                "xi": {"type": "number"},
                "kappa": {"type": "number", "exclusiveMinimum": 0},
                "c1": {"type": "number", "exclusiveMinimum": 0},
                "c2": {"type": "number", "exclusiveMinimum": 0},
                "u_potential": _TERM_SCHEMA,
            },
            "required": ["interpretation"],
            "additionalProperties": False,
        },
        "grids": {
            "type": "object",
            "properties": {
                "tau": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                "p": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 1,
                },
                "p_log_range": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "p_points": {"type": "integer", "minimum": 3},
                "eta": {"type": "number"},
                "etap": {"type": "number"},
                "dx_log_range": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "dx_points": {"type": "integer", "minimum": 3},
            },
            "additionalProperties": False,
        },
        "mc": {
            "type": "object",
            "properties": {
                "n_paths": {"type": "integer", "minimum": 1},
                "n_steps": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
                "dirichlet": {"type": "boolean"},
                "antithetic": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "quadrature": {
            "type": "object",
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "fits": {
            "type": "object",
            "properties": {
                "window": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "n_points": {"type": "integer", "minimum": 3},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "prefix": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["grids", "mc", "quadrature", "fits", "output"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(_SCHEMA)


def validate_config(cfg: dict) -> None:
    """Schema validation plus the cross-field invariants; raises ConfigError
    naming the offending field."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration root must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        path = ".".join(str(s) for s in e.path) or "(top level)"
        raise ConfigError(f"invalid configuration at {path!r}: {e.message}")
    has_pot = "potential" in cfg
    has_met = "metric" in cfg
    if has_pot == has_met:
        raise ConfigError(
            "exactly one of 'potential' and 'metric' must be present"
        )
    if has_met:
        met = cfg["metric"]
        if ("alpha" in met) == ("alphas" in met):
            raise ConfigError(
                "metric: exactly one of 'alpha' and 'alphas' must be present"
            )
        if met.get("xi", 0.0) != 0.0:
            raise ConfigError(
                "metric.xi: only xi = 0 is supported (the xi != 0 coupling "
                "produces a potential outside the power-law family)"
            )
    pot = cfg.get("potential")
    if pot is not None:
        if pot["type"] == "isotropic" and "d" not in pot:
            raise ConfigError("potential.d is required for isotropic forms")
    grids = cfg["grids"]
    if ("p" in grids) and ("p_log_range" in grids):
        raise ConfigError("grids: give either 'p' or 'p_log_range', not both")
    if "seed" not in cfg["mc"] and not os.environ.get("FKG_SEED", "").strip():
        raise ConfigError(
            "mc.seed is required (or supply the FKG_SEED environment variable)"
        )


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply repeatable KEY=VALUE overrides, KEY a dot-path into the JSON.

    Values parse as JSON when possible, else as strings.
    """
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form KEY=VALUE")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} does not address an object")
            node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} does not address an object")
        node[parts[-1]] = value
    return cfg


def effective_seed(cfg: dict) -> int:
    env = os.environ.get("FKG_SEED", "").strip()
    if env:
        try:
            seed = int(env, 10)
        except ValueError as exc:
            raise ConfigError(f"FKG_SEED {env!r} is not a decimal integer") from exc
        if not 0 <= seed < 2**64:
            raise ConfigError("FKG_SEED must fit in 64 bits")
        return seed
    return int(cfg["mc"]["seed"])


def _terms(specs) -> tuple[PowerLawTerm, ...]:
    return tuple(
        PowerLawTerm(t["amplitude"], t["exponent"], t.get("center", 0.0))
        for t in specs
    )


def build_potentials(cfg: dict):
    """Compile the potential or metric section into (momentum form, W,
    metadata dict)."""
    if "metric" in cfg:
        met = cfg["metric"]
        interpretation = met["interpretation"]
        d = 3 if interpretation == COSMOLOGICAL else 2
        exponents = (
            tuple(met["alphas"]) if "alphas" in met else (met["alpha"],)
        )
        model = MetricModel(
            spatial_dim=d,
            exponents=exponents,
            mass=met.get("mass", 0.0),
            coupling_xi=met.get("xi", 0.0),
            interpretation=interpretation,
        )
        u_spec = met.get("u_potential")
        u_term = _terms([u_spec])[0] if u_spec is not None else None
        compiled = metric_to_potentials(
            model,
            kappa=met.get("kappa", 1.0),
            c1=met.get("c1", 1.0),
            c2=met.get("c2", 1.0),
            u_potential=u_term,
        )
        meta = {
            "nu": compiled.nu,
            "sigma": compiled.sigma,
            "theorem1_regime": compiled.theorem1_regime,
            "b_finite": compiled.b_finite,
        }
        return compiled.form, compiled.scalar, meta

    pot = cfg["potential"]
    terms = _terms(pot["terms"])
    if pot["type"] == "isotropic":
        form = IsotropicForm(pot["d"], terms)
    else:
        form = DiagonalForm(terms)
    w = ScalarPotential(_terms(pot.get("w_terms", ())))
    return form, w, {}


def potential_spec_of(form, w) -> dict:
    """Emit a 'potential' config section reproducing (form, w); the inverse
    of build_potentials for the power-law family."""

    def term_spec(t):
        return {
            "amplitude": t.amplitude,
            "exponent": t.exponent,
            "center": t.center,
        }

    if isinstance(form, IsotropicForm):
        spec: dict[str, Any] = {
            "type": "isotropic",
            "d": form.d,
            "terms": [term_spec(t) for t in form.terms],
        }
    elif isinstance(form, DiagonalForm):
        spec = {"type": "diagonal", "terms": [term_spec(t) for t in form.terms]}
    else:
        raise ConfigError("only power-law forms have a config representation")
    spec["w_terms"] = [term_spec(t) for t in w.terms]
    return spec


def p_grid(cfg: dict) -> np.ndarray:
    grids = cfg["grids"]
    if "p" in grids:
        return np.asarray(grids["p"], dtype=float)
    if "p_log_range" in grids:
        lo, hi = grids["p_log_range"]
        n = grids.get("p_points", 8)
        return np.logspace(np.log10(lo), np.log10(hi), n)
    raise ConfigError("grids: a momentum grid ('p' or 'p_log_range') is required")


def tau_grid(cfg: dict) -> np.ndarray:
    grids = cfg["grids"]
    if "tau" not in grids:
        raise ConfigError("grids.tau is required for this subcommand")
    return np.asarray(grids["tau"], dtype=float)


def dx_grid(cfg: dict) -> np.ndarray:
    grids = cfg["grids"]
    if "dx_log_range" not in grids:
        raise ConfigError("grids.dx_log_range is required for this subcommand")
    lo, hi = grids["dx_log_range"]
    n = grids.get("dx_points", 6)
    return np.logspace(np.log10(lo), np.log10(hi), n)
