"""TOML experiment configuration with strict keys and dotted overrides.

A config file holds a [world] and [agent] section (mapped onto the dataclass
fields, unknown keys rejected) plus flat sections for each pipeline stage.
Command lines apply ``section.key=value`` overrides before validation. The
fully merged dict is hashed so run directories are content-addressed:
``<name>-<hash8>-s<seed>``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .vtcon import AgentConfig
from .world import (
    ObjectShape,
    RandomizationConfig,
    SensorGeometry,
    TrajectoryParams,
    WorldConfig,
)

SECTION_DEFAULTS = {
    "run": {"name": "vitac", "out_root": "runs"},
    "collect": {"n_sequences": 100, "seed": 0, "probe_episodes": 20},
    "vtgen": {"epochs": 30, "batch_size": 64, "seed": 0, "lr": 1e-3,
              "frame_stride": 4, "lambda_pix": 1.0, "eval_stride": 8},
    "train": {"steps": 150_000, "seed": 0, "log_every": 50},
    "evaluate": {"episodes": 50, "seed": 1000, "threshold": None},
    "ablate": {"axis": "fusion", "steps": 20_000, "seeds": [0, 1, 2],
               "eval_episodes": 20, "threshold": 0.04},
}

_NESTED_WORLD = {
    "object": ObjectShape,
    "sensor": SensorGeometry,
    "trajectory": TrajectoryParams,
    "randomization": RandomizationConfig,
}


class ConfigError(ValueError):
    pass


def _build_dataclass(dc_type, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(dc_type)}
    kwargs = {}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown key {here!r} for {dc_type.__name__}")
        if dc_type is WorldConfig and key in _NESTED_WORLD:
            if not isinstance(value, dict):
                raise ConfigError(f"{here!r} must be a table")
            value = _build_dataclass(_NESTED_WORLD[key], value, here)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return dc_type(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{path or dc_type.__name__}] section: {exc}") from exc


def _merge_section(name: str, data: dict) -> dict:
    defaults = SECTION_DEFAULTS[name]
    out = dict(defaults)
    for key, value in data.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {name!r}.{key!r}")
        out[key] = value
    return out


@dataclass
class Experiment:
    name: str
    out_root: str
    world: WorldConfig
    agent: AgentConfig
    sections: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @property
    def hash8(self) -> str:
        return self.hash[:8]

    def section(self, name: str) -> dict:
        return self.sections[name]

    def run_dir(self, stage: str, seed: int, create: bool = True) -> Path:
        path = Path(self.out_root) / f"{self.name}-{stage}-{self.hash8}-s{seed}"
        if create:
            path.mkdir(parents=True, exist_ok=True)
        return path

    def dump(self, path: str | os.PathLike):
        with open(path, "w") as fh:
            json.dump({"hash": self.hash, "config": self.raw}, fh, indent=2,
                      sort_keys=True, default=str)
            fh.write("\n")


def parse_override(spec: str) -> tuple[list[str], object]:
    """``section.key=value`` -> dotted path plus a TOML-parsed value."""
    key, sep, raw = spec.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {spec!r} must look like section.key=value")
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw  # bare string
    return key.strip().split("."), value


def _apply_override(data: dict, path: list[str], value):
    node = data
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {'.'.join(path)!r} crosses a non-table value")
    node[path[-1]] = value


def load_config(path: str | os.PathLike | None = None, overrides=()) -> Experiment:
    """Parse a TOML file (or start from defaults), apply overrides, validate."""
    if path is None:
        data: dict = {}
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    for spec in overrides:
        dotted, value = parse_override(spec)
        _apply_override(data, dotted, value)

    known = {"world", "agent", *SECTION_DEFAULTS}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; expected {sorted(known)}")

    world = _build_dataclass(WorldConfig, data.get("world", {}), "world")
    agent = _build_dataclass(AgentConfig, data.get("agent", {}), "agent")
    sections = {name: _merge_section(name, data.get(name, {})) for name in SECTION_DEFAULTS}
    run = sections.pop("run")

    raw = {
        "world": data.get("world", {}),
        "agent": data.get("agent", {}),
        "run": run,
        **sections,
    }
    return Experiment(name=run["name"], out_root=run["out_root"], world=world,
                      agent=agent, sections=sections, raw=raw)
