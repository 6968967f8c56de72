"""Run configuration: defaults, config file, then command line, in that order.

A config file is one `key = value` pair per line, # comments allowed. Keys
must be known to the command being run; anything else is a usage error so
typos fail loudly instead of silently using a default.
"""
from __future__ import annotations

import json
import os

from .errors import UsageError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{ln}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not key:
            raise UsageError(f"{source}:{ln}: empty key")
        if key in out:
            raise UsageError(f"{source}:{ln}: duplicate key {key!r}")
        out[key] = val.strip()
    return out


def load_config_file(path) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def coerce(key: str, raw, default):
    """Cast a raw string to the type of the default for that key."""
    if raw is None or not isinstance(raw, str):
        return raw
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise UsageError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def resolve(defaults: dict, file_cfg: dict | None, cli_cfg: dict | None) -> dict:
    """Merge the three layers; reject keys absent from `defaults`."""
    merged = dict(defaults)
    for source_name, layer in (("config file", file_cfg), ("command line", cli_cfg)):
        if not layer:
            continue
        for key, raw in layer.items():
            if key not in defaults:
                known = ", ".join(sorted(defaults))
                raise UsageError(f"unknown {source_name} key {key!r}; known keys: {known}")
            merged[key] = coerce(key, raw, defaults[key])
    return merged


def dump_config(cfg: dict, out_dir, name: str = "run_config.json") -> str:
    """Write the fully resolved configuration for provenance."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return path
