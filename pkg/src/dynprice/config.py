"""Run configuration documents (YAML or JSON), validated against a JSON schema."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import jsonschema
import yaml

from .glm import ModelParams
from .harness import EnvTemplate, ExperimentGrid
from .policies import POLICIES, PolicySpec, Tuning

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_RANGE = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2}
_NULLABLE_NUM = {"type": ["number", "null"]}

TUNING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {f.name: _POS_INT if str(f.type).startswith("int") else _POS for f in fields(Tuning)},
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["env", "policies"],
    "properties": {
        "env": {
            "type": "object",
            "additionalProperties": False,
            "required": ["scenario"],
            "properties": {
                "scenario": {"enum": ["s1", "s2", "a1", "a2", "multinomial_lb", "replay"]},
                "d": _POS_INT,
                "family": {"enum": ["gaussian", "logistic", "poisson"]},
                "theta": {
                    "oneOf": [
                        {"const": "fit-from-data"},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["alpha", "beta"],
                            "properties": {"alpha": {"type": "array", "items": _NUM, "minItems": 1},
                                           "beta": {"type": "array", "items": _NUM, "minItems": 1}},
                        },
                    ]
                },
                "data": {"type": "string"},
                "pool": {"type": "string"},
                "rate": {"type": "number", "minimum": 0},
                "price_range": _RANGE,
                "explore_range": _RANGE,
                "horizon": _POS_INT,
                "mixed_p": {"type": "number", "minimum": 0, "maximum": 1},
                "lb_delta": _POS,
                "v": {"type": "array", "items": {"enum": [0, 1]}},
                "noise_scale": _POS,
            },
        },
        "policies": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": sorted(POLICIES)},
                    "variant": {"type": ["string", "null"]},
                    "tuning": TUNING_SCHEMA,
                    "epsilon": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    "delta": {"type": ["number", "null"], "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "known_horizon": {"type": "boolean"},
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_list": {"type": "array", "items": _POS_INT, "minItems": 1},
                "T_list": {"type": "array", "items": _POS_INT, "minItems": 1},
                "eps_list": {"type": "array", "items": _POS, "minItems": 1},
                "delta_list": {"type": "array", "items": _NULLABLE_NUM, "minItems": 1},
                "mixed_p_list": {"type": "array", "items": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                                 "minItems": 1},
                "reps": _POS_INT,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "path_stride": _POS_INT},
        },
    },
}

DEFAULTS = {
    "grid": {"reps": 10, "seed": 0},
    "output": {"dir": "out", "path_stride": 100},
}


class ConfigError(ValueError):
    pass


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


@dataclass
class RunConfig:
    """A validated configuration document.  ``doc`` keeps the canonical dictionary form."""

    doc: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def env(self) -> dict:
        return self.doc["env"]

    @property
    def grid_section(self) -> dict:
        return {**DEFAULTS["grid"], **self.doc.get("grid", {})}

    @property
    def output(self) -> dict:
        return {**DEFAULTS["output"], **self.doc.get("output", {})}

    def policy_specs(self) -> tuple[PolicySpec, ...]:
        out = []
        for p in self.doc["policies"]:
            out.append(PolicySpec(p["kind"], p.get("variant"), Tuning(**p.get("tuning", {})),
                                  p.get("epsilon"), p.get("delta"), p.get("known_horizon", True)))
        return tuple(out)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def truth(self) -> ModelParams | None:
        theta = self.env.get("theta")
        if isinstance(theta, dict):
            return ModelParams(theta["alpha"], theta["beta"])
        return None

    def template(self, truth: ModelParams | None = None, pool=None) -> EnvTemplate:
        env = self.env
        return EnvTemplate(
            scenario=env["scenario"],
            family=env.get("family", "logistic"),
            price_range=tuple(env.get("price_range", (0.0, 3.0))),
            explore_range=None if "explore_range" not in env else tuple(env["explore_range"]),
            truth=truth if truth is not None else self.truth(),
            pool=pool,
            delta=env.get("lb_delta", 0.5),
            v=None if "v" not in env else tuple(env["v"]),
            noise_scale=env.get("noise_scale", 1.0),
        )

    def grid(self, seed: int | None = None, jobs: int = 1, d_default: int | None = None) -> ExperimentGrid:
        g = self.grid_section
        env = self.env
        d_list = g.get("d_list") or [env.get("d", d_default)]
        T_list = g.get("T_list") or [env.get("horizon")]
        if None in d_list or None in T_list:
            raise ConfigError("set grid.d_list/env.d and grid.T_list/env.horizon")
        return ExperimentGrid(
            policies=self.policy_specs(),
            d_list=tuple(d_list),
            T_list=tuple(T_list),
            eps_list=tuple(g.get("eps_list", (1.0,))),
            delta_list=tuple(g.get("delta_list", (None,))),
            mixed_p_list=tuple(g.get("mixed_p_list", (env.get("mixed_p"),))),
            reps=g["reps"],
            seed=g["seed"] if seed is None else seed,
            jobs=jobs,
            path_stride=self.output["path_stride"],
        )

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def dumps(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True) + "\n"


def parse_config(doc: dict, base_dir=None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    validate(doc)
    for p in doc["policies"]:
        try:
            Tuning(**p.get("tuning", {}))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    env = doc["env"]
    theta = env.get("theta")
    if theta == "fit-from-data" and "data" not in env:
        raise ConfigError("theta 'fit-from-data' needs env.data")
    if isinstance(theta, dict) and len(theta["alpha"]) != len(theta["beta"]):
        raise ConfigError("theta alpha and beta must have the same length")
    if "price_range" in env and not env["price_range"][0] < env["price_range"][1]:
        raise ConfigError("price_range must satisfy l < u")
    return RunConfig(copy.deepcopy(doc), Path(base_dir) if base_dir is not None else Path.cwd())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)  # JSON documents are valid YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON ({exc})") from None
    return parse_config(doc, path.parent)


def schema_help() -> str:
    return json.dumps(SCHEMA, indent=2)
