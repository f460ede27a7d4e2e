"""Flat ``dotted.key = value`` run configuration files.

Example::

    # first layer as a TT-layer
    network.layers.0.kind = tt
    network.layers.0.row_modes = 4,4,4,4,4
    optimizer.lr = 0.01

Numeric key segments index into lists. Comma-separated values are lists.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from src.core.errors import ConfigError
from src.schemas.config import LAYER_KINDS, RunConfig

LIST_KEYS = {"row_modes", "col_modes", "lr_decay_epochs"}


def parse_flat(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(
                f"line {number}: expected 'key = value', got {raw!r}", [key or f"line {number}"]
            )
        entries[key] = value.strip()
    return entries


def parse_overrides(pairs: Iterable[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {pair!r} is not of the form key=value", [key.strip()])
        overrides[key.strip()] = value.strip()
    return overrides


def _typed(key: str, value: str) -> Any:
    leaf = key.rsplit(".", 1)[-1]
    if leaf in LIST_KEYS or "," in value:
        return [item.strip() for item in value.split(",") if item.strip()]
    if value == "":
        return None
    return value


def _listify(node: Any, path: str) -> Any:
    if not isinstance(node, dict):
        return node
    converted = {k: _listify(v, f"{path}.{k}" if path else k) for k, v in node.items()}
    if converted and all(k.isdigit() for k in converted):
        positions = sorted(int(k) for k in converted)
        if positions != list(range(len(positions))):
            raise ConfigError(
                f"list entries under {path!r} must be numbered 0..{len(positions) - 1}", [path]
            )
        return [converted[str(p)] for p in positions]
    return converted


def unflatten(flat: Mapping[str, str]) -> dict[str, Any]:
    tree: dict[str, Any] = {}
    for key, value in flat.items():
        segments = key.split(".")
        node = tree
        for depth, segment in enumerate(segments[:-1]):
            child = node.setdefault(segment, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"{'.'.join(segments[: depth + 1])!r} is both a value and a section", [key]
                )
            node = child
        if isinstance(node.get(segments[-1]), dict):
            raise ConfigError(f"{key!r} is both a value and a section", [key])
        node[segments[-1]] = _typed(key, value)
    return _listify(tree, "")


def _field_path(loc: tuple[Any, ...]) -> str:
    parts: list[str] = []
    for position, segment in enumerate(loc):
        # discriminated unions insert the tag after the list index
        if segment in LAYER_KINDS and position > 0 and isinstance(loc[position - 1], int):
            continue
        parts.append(str(segment))
    return ".".join(parts)


def validate_config(tree: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        paths = [_field_path(error["loc"]) for error in exc.errors()]
        details = "; ".join(
            f"{_field_path(error['loc']) or '<root>'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigError(f"invalid run configuration: {details}", paths) from exc


def load_run_config(
    path: str | Path | None = None, overrides: Mapping[str, str] | None = None
) -> RunConfig:
    flat: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}", ["--config"])
        flat.update(parse_flat(path.read_text(encoding="utf-8")))
    flat.update(overrides or {})
    return validate_config(unflatten(flat))


def _flatten(value: Any, prefix: str, out: dict[str, str]) -> None:
    if isinstance(value, dict):
        for key, child in value.items():
            _flatten(child, f"{prefix}.{key}" if prefix else key, out)
    elif isinstance(value, list) and any(isinstance(item, dict) for item in value):
        for index, child in enumerate(value):
            _flatten(child, f"{prefix}.{index}", out)
    elif isinstance(value, list):
        out[prefix] = ",".join(str(item) for item in value)
    elif value is None:
        out[prefix] = ""
    else:
        out[prefix] = str(value)


def dump_flat(config: RunConfig) -> str:
    flat: dict[str, str] = {}
    _flatten(config.model_dump(mode="json"), "", flat)
    return "".join(f"{key} = {value}\n" for key, value in flat.items())
