"""Configuration files, environment overrides and validation.

A config is a tree with a ``sim`` section (run-level keys such as
``agents`` or ``matcher``) and one section per subsystem: ``grid``,
``economy``, ``population``, ``marl``, ``pso``, ``metrics``. Files may be
YAML or JSON. Environment variables ``ARS_<KEY>`` override ``sim`` keys and
``ARS_<SECTION>__<KEY>`` override section keys.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import yaml

from .baselines import PsoParams
from .economy import EconomyParams
from .errors import ConfigError, InputError
from .population import PopulationParams
from .sim import GridSettings, MarlSettings, MetricsSettings, SimulationConfig

ENV_PREFIX = "ARS_"

# section name -> (SimulationConfig attribute, dataclass)
SECTIONS = {
    "grid": ("grid", GridSettings),
    "economy": ("economy", EconomyParams),
    "population": ("population_params", PopulationParams),
    "marl": ("marl", MarlSettings),
    "pso": ("pso", PsoParams),
    "metrics": ("metrics", MetricsSettings),
}
SIM_KEYS = [f.name for f in dataclasses.fields(SimulationConfig) if f.name not in {a for a, _ in SECTIONS.values()}]


def load_tree(path):
    """Read a YAML or JSON config file into a nested dict."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    text = path.read_text()
    try:
        tree = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if tree is None:
        return {}
    if not isinstance(tree, dict):
        raise ConfigError("config", "top level must be a mapping")
    return tree


def env_tree(environ=None):
    """Overrides collected from ``ARS_*`` environment variables."""
    environ = os.environ if environ is None else environ
    tree = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        value = yaml.safe_load(raw) if raw != "" else raw
        if "__" in key:
            section, sub = key.split("__", 1)
            tree.setdefault(section, {})[sub] = value
        else:
            tree.setdefault("sim", {})[key] = value
    return tree


def merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def _coerce(key, value, default):
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("true", "yes", "1", "on"):
                    return True
                if low in ("false", "no", "0", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"invalid value {value!r} (expected {type(default).__name__})") from exc
    return value


def _build(cls, values: dict, prefix):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    probe = cls()
    for k, v in values.items():
        if k not in fields:
            raise ConfigError(f"{prefix}{k}", "unknown key")
        kwargs[k] = _coerce(f"{prefix}{k}", v, getattr(probe, k))
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError(prefix.rstrip("."), str(exc)) from exc


def config_from_tree(tree: dict) -> SimulationConfig:
    """Build and validate a :class:`SimulationConfig` from a nested dict."""
    tree = dict(tree or {})
    for section in tree:
        if section != "sim" and section not in SECTIONS:
            raise ConfigError(section, "unknown config section")
    sim_vals = dict(tree.get("sim") or {})
    if "population_mode" in sim_vals:
        sim_vals["population"] = sim_vals.pop("population_mode")
    probe = SimulationConfig()
    kwargs = {}
    for k, v in sim_vals.items():
        if k not in SIM_KEYS:
            raise ConfigError(k, "unknown key")
        default = getattr(probe, k)
        if k in ("capacities", "trips"):
            kwargs[k] = v
        else:
            kwargs[k] = _coerce(k, v, default)
    for section, (attr, cls) in SECTIONS.items():
        vals = tree.get(section) or {}
        if not isinstance(vals, dict):
            raise ConfigError(section, "section must be a mapping")
        kwargs[attr] = _build(cls, vals, f"{section}.")
    cfg = SimulationConfig(**kwargs)
    return cfg.validate()


def load_config(path=None, overrides=None, environ=None) -> SimulationConfig:
    """File, then environment, then explicit overrides (highest priority)."""
    tree = load_tree(path) if path else {}
    tree = merge(tree, env_tree(environ))
    if overrides:
        tree = merge(tree, overrides)
    return config_from_tree(tree)


def config_to_tree(cfg: SimulationConfig) -> dict:
    d = dataclasses.asdict(cfg)
    tree = {"sim": {k: d[k] for k in SIM_KEYS}}
    for section, (attr, _) in SECTIONS.items():
        tree[section] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d[attr].items()}
    return tree
