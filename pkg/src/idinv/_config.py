"""Strict dataclass <-> dict conversion used by configs and manifests."""

from __future__ import annotations

import dataclasses
import typing

from .errors import InvalidArgumentError


def config_to_dict(obj) -> dict:
    if not dataclasses.is_dataclass(obj):
        raise InvalidArgumentError(f"{type(obj).__name__} is not a config dataclass")
    out = {}
    for f in dataclasses.fields(obj):
        if not f.init:
            continue
        value = getattr(obj, f.name)
        out[f.name] = config_to_dict(value) if dataclasses.is_dataclass(value) else value
    return out


def config_from_dict(cls, data: dict):
    """Build a config dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise InvalidArgumentError(
            f"expected a mapping for {cls.__name__}, got {type(data).__name__}"
        )
    fields = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - fields
    if unknown:
        raise InvalidArgumentError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name, value in data.items():
        ftype = hints.get(name)
        if dataclasses.is_dataclass(ftype) and isinstance(value, dict):
            value = config_from_dict(ftype, value)
        kwargs[name] = value
    return cls(**kwargs)
