"""
RunConfig loading: defaults.yaml, deep-merged user file, CLI overrides,
and the resolved copy written next to every command's outputs.
"""
import copy
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from config.paths import DEFAULTS_FILE, RESOLVED_CONFIG_NAME, output_root
from ml.errors import ConfigurationError

SECTIONS = (
    "seed", "output_dir", "manifest", "trainer", "alpha", "mode", "rewards",
    "eval", "ablation", "continual", "compare", "validate",
)


# ---------------------------------------------------------
# Helpers
# ---------------------------------------------------------
def deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def plain(value):
    """Tuples -> lists and numpy scalars -> Python so yaml.safe_dump accepts it."""
    if isinstance(value, dict):
        return {k: plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _read_yaml(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"invalid YAML in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a mapping at top level")
    return data


def build_section(cls, section: dict | None, name: str, renames: dict | None = None):
    """
    Instantiate dataclass `cls` from a config section. Unknown keys are a
    configuration error; lists become tuples.
    """
    renames = renames or {}
    section = dict(section or {})
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    unknown = []
    for key, value in section.items():
        attr = renames.get(key, key)
        if attr not in allowed:
            unknown.append(key)
            continue
        kwargs[attr] = tuple(value) if isinstance(value, list) else value
    if unknown:
        raise ConfigurationError(f"unknown {name} keys: {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigurationError(f"invalid {name} section: {e}")


# ---------------------------------------------------------
# RunConfig
# ---------------------------------------------------------
def load_run_config(path=None, overrides: dict | None = None) -> dict:
    config = _read_yaml(DEFAULTS_FILE)
    if path is not None:
        config = deep_merge(config, _read_yaml(Path(path)))
    if overrides:
        config = deep_merge(config, overrides)

    unknown = set(config) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return config


def cli_overrides(seed=None, out=None, mode=None, alpha0=None) -> dict:
    overrides: dict = {}
    if seed is not None:
        overrides["seed"] = int(seed)
        overrides["trainer"] = {"seed": int(seed)}
        overrides["manifest"] = {"seed": int(seed)}
    if out is not None:
        overrides["output_dir"] = str(out)
    if mode is not None or alpha0 is not None:
        overrides["mode"] = {}
        if mode is not None:
            overrides["mode"]["name"] = mode
        if alpha0 is not None:
            overrides["mode"]["alpha0"] = float(alpha0)
    return overrides


def resolve_output_dir(config: dict, command: str) -> Path:
    out = config.get("output_dir")
    path = Path(out).expanduser() if out else output_root() / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_resolved_config(config: dict, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / RESOLVED_CONFIG_NAME
    with open(target, "w", encoding="utf-8") as f:
        yaml.safe_dump(plain(config), f, sort_keys=False)
    return target
