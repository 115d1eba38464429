# -*- mode: python; coding: utf-8 -*-
#
# Copyright (C) 2025 Benjamin Thomas Schwertfeger
# All rights reserved.
# https://github.com/btschwertfeger
#

"""
Loading of the flat key-value configuration files.

A configuration file is a YAML document whose top level is a mapping of scalar
values, e.g.::

    # vehicle.yaml
    m: 1.0          # kg
    omega_max: 2200 # rad/s

Missing keys take the defaults of the corresponding record, unknown keys and
nested values are rejected. The PID gains file prefixes the fields of each
channel with the channel name (``x_kp``, ``roll_integral_limit``, ...).
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, fields, is_dataclass
from logging import getLogger
from pathlib import Path
from typing import Any, TypeVar

import yaml

from vtol_transition.dynamics import VehicleParams
from vtol_transition.exceptions import ConfigurationError
from vtol_transition.pid import DualLoopGains, PidGains
from vtol_transition.policy import PpoConfig

LOG = getLogger(__name__)

Record = TypeVar("Record")

_GAIN_CHANNELS: tuple[str, ...] = ("x", "y", "z", "roll", "pitch", "yaw")


def load_flat_config(path: str | Path) -> dict[str, float | int | str | bool]:
    """
    Parses a configuration file into a flat mapping.

    Raises:
        ConfigurationError: if the file is missing, isn't valid YAML or holds
            anything but a flat mapping of scalars.
    """
    path = Path(path)
    LOG.debug("Loading configuration from '%s'", path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            content = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigurationError(f"Unable to read configuration: {exc.strerror}", path=path) from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"Invalid YAML: {exc}", path=path) from exc

    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigurationError("Configuration must be a mapping of keys to values", path=path)
    for key, value in content.items():
        if not isinstance(key, str):
            raise ConfigurationError("Configuration keys must be strings", path=path, key=str(key))
        if not isinstance(value, (int, float, str, bool)):
            raise ConfigurationError("Configuration values must be scalars", path=path, key=key)
    return content


def _coerce(value: object, annotation: Any, path: Path | None, key: str) -> object:  # noqa: ANN401
    expected = getattr(annotation, "__name__", annotation)
    if expected == "float" and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if expected == "int" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if expected == "bool" and isinstance(value, bool):
        return value
    raise ConfigurationError(f"Expected a value of type {expected}, got {value!r}", path=path, key=key)


def _record_from_flat(cls: type[Record], values: dict[str, Any], path: Path | None = None) -> Record:
    known = {field.name: field for field in fields(cls)}  # type: ignore[arg-type]
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigurationError("Unknown configuration key", path=path, key=key)
        kwargs[key] = _coerce(value, known[key].type, path, key)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(exc.message, path=path, key=exc.key) from exc


def to_flat_config(record: object) -> dict[str, Any]:
    """Flat mapping of a configuration record, nested records joined by ``_``."""
    if not is_dataclass(record) or isinstance(record, type):
        raise TypeError(f"Expected a dataclass instance, got {record!r}")
    flat: dict[str, Any] = {}
    for key, value in asdict(record).items():
        if isinstance(value, dict):
            flat |= {f"{key}_{name}": inner for name, inner in value.items()}
        else:
            flat[key] = value
    return flat


def load_vehicle_params(path: str | Path | None = None) -> VehicleParams:
    """Vehicle parameters from ``path``, or the defaults."""
    if path is None:
        return VehicleParams()
    return _record_from_flat(VehicleParams, load_flat_config(path), Path(path))


def load_pid_gains(path: str | Path | None = None) -> DualLoopGains:
    """Dual-loop PID gains from ``path``, or the shipped defaults."""
    defaults = DualLoopGains()
    if path is None:
        return defaults
    path = Path(path)
    values = load_flat_config(path)

    channels: dict[str, dict[str, Any]] = {name: {} for name in _GAIN_CHANNELS}
    rest: dict[str, Any] = {}
    for key, value in values.items():
        prefix, _, name = key.partition("_")
        if prefix in channels and name:
            channels[prefix][name] = value
        else:
            rest[key] = value

    kwargs: dict[str, Any] = {}
    for channel, overrides in channels.items():
        merged = asdict(getattr(defaults, channel))
        for name in overrides:
            if name not in merged:
                raise ConfigurationError("Unknown configuration key", path=path, key=f"{channel}_{name}")
        merged |= overrides
        try:
            kwargs[channel] = _record_from_flat(PidGains, merged, path)
        except ConfigurationError as exc:
            key = f"{channel}_{exc.key}" if exc.key else channel
            raise ConfigurationError(exc.message, path=path, key=key) from exc
    for key, value in rest.items():
        if key != "max_tilt":
            raise ConfigurationError("Unknown configuration key", path=path, key=key)
        kwargs[key] = _coerce(value, "float", path, key)
    try:
        return DualLoopGains(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(exc.message, path=path, key=exc.key) from exc


def load_ppo_config(path: str | Path | None = None) -> PpoConfig:
    """Optimizer and curriculum hyperparameters from ``path``, or the defaults."""
    if path is None:
        return PpoConfig()
    return _record_from_flat(PpoConfig, load_flat_config(path), Path(path))


def config_hash(path: str | Path | None = None, default: object | None = None) -> str:
    """
    SHA-256 of a configuration file.

    Without a file, the canonical YAML dump of the ``default`` record is hashed
    instead, so that runs on defaults are still distinguishable from runs on
    edited files.
    """
    if path is not None:
        try:
            return hashlib.sha256(Path(path).read_bytes()).hexdigest()
        except OSError as exc:
            raise ConfigurationError(f"Unable to read configuration: {exc.strerror}", path=path) from exc
    canonical = yaml.safe_dump(to_flat_config(default) if default is not None else {}, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
