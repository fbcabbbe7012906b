"""Layered run configuration: experiment defaults plus file overrides.

The file format is a YAML (or JSON) mapping with one section per parameter
group; keys mirror the dataclass field names and use the same units
(meters, seconds, radians).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .dynamics import EgoParams
from .environment import EnvParams
from .predicates import RuleParams
from .reachability import PointMassParams
from .scenarios import GeneratorConfig


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass(frozen=True)
class Params:
    rule: RuleParams
    ego: EgoParams
    pm: PointMassParams
    env: EnvParams
    generator: GeneratorConfig

    def to_dict(self) -> dict:
        out = {}
        for section in dataclasses.fields(self):
            value = getattr(self, section.name)
            out[section.name] = {f.name: _jsonable(getattr(value, f.name))
                                 for f in dataclasses.fields(value)}
        return out


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


_SECTIONS = {
    "rule": RuleParams,
    "ego": EgoParams,
    "pm": PointMassParams,
    "env": EnvParams,
    "generator": GeneratorConfig,
}

_TUPLE_FIELDS = {"accels", "turn_rates", "encounter_distance", "speed_range", "kinds"}


def default_params() -> Params:
    return Params(RuleParams(), EgoParams(), PointMassParams(), EnvParams(),
                  GeneratorConfig())


def load_params(path=None) -> Params:
    """Defaults overlaid with the sections found in the override file."""
    if path is None:
        return default_params()
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) \
            else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse parameter file {path}: {exc}") from exc
    if data is None:
        return default_params()
    if not isinstance(data, dict):
        raise ConfigError("parameter file must contain a mapping")
    sections = {}
    for name, cls in _SECTIONS.items():
        overrides = data.pop(name, {})
        if not isinstance(overrides, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
        clean = {k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
                 for k, v in overrides.items()}
        try:
            sections[name] = cls(**clean)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid values in section {name!r}: {exc}") from exc
    if data:
        raise ConfigError(f"unknown configuration sections: {sorted(data)}")
    return Params(**sections)
