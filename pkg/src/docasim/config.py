"""YAML scenario files: parsing, validation, serialization, fingerprinting.

Every key of :class:`~docasim.model.ScenarioConfig` may appear at the top
level of the document; omitted keys keep their defaults and unknown keys are
rejected. See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import yaml

from .model import ConfigError, ScenarioConfig, SpeedModel

CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig))
_INT_KEYS = {"subchannel_count", "cell_capacity_rb", "rng_seed"}
_SPEED_KEYS = {"actual_speed_model", "predicted_speed_model"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _SPEED_KEYS:
            return SpeedModel.parse(value)
        if key == "message_period_choices":
            return _coerce_periods(value)
        if isinstance(value, bool):
            raise TypeError("booleans are not numbers")
        if key in _INT_KEYS:
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(as_float)
        return float(value)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(key, str(exc)) from None


def _coerce_periods(value: Any) -> tuple:
    """Accept ``[[period, weight], ...]``, ``{period: weight}`` or a bare period list."""
    if isinstance(value, Mapping):
        items = list(value.items())
    elif isinstance(value, str):
        items = [(p, 1.0) for p in value.split(",") if p.strip()]
    else:
        items = []
        for item in value:
            if isinstance(item, (list, tuple)):
                if len(item) != 2:
                    raise ValueError(f"expected [period_s, weight], got {item!r}")
                items.append((item[0], item[1]))
            else:
                items.append((item, 1.0))
    return tuple((float(p), float(w)) for p, w in items)


def config_from_dict(data: Mapping[str, Any] | None, base: ScenarioConfig | None = None) -> ScenarioConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    values = {k: _coerce(k, v) for k, v in data.items()}
    base = base or ScenarioConfig()
    return dataclasses.replace(base, **values)


def parse_config(path: str | Path | None) -> ScenarioConfig:
    """Load a scenario file; ``None`` yields the defaults."""
    if path is None:
        return ScenarioConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"malformed YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("config", "top level must be a mapping")
    return config_from_dict(data)


def config_to_dict(config: ScenarioConfig) -> dict:
    out = {}
    for key in CONFIG_KEYS:
        value = getattr(config, key)
        if isinstance(value, SpeedModel):
            value = value.to_dict()
        elif key == "message_period_choices":
            value = [[p, w] for p, w in value]
        out[key] = value
    return out


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)


def fingerprint(config: ScenarioConfig) -> str:
    """Short stable hash of every parameter except the seed."""
    payload = config_to_dict(config)
    payload.pop("rng_seed")
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
