"""Run configuration: key=value files validated against per-command schemas.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment anywhere on a line, blank lines are skipped.  Every key a command
consumes is declared in that command's schema with a type and an optional
default; unknown keys, duplicate keys, missing required keys, and
unparseable values are errors that name the key (and line) involved.

This module is dependency-free on purpose: the command line parses and
validates configuration before any numeric code is imported.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ArgumentError, FormatError

REQUIRED = object()


@dataclass(frozen=True)
class Key:
    """One schema entry: a value kind plus an optional default."""

    kind: str
    default: object = REQUIRED
    choices: tuple = ()
    help: str = ""


def _parse_bool(raw: str, name: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1"):
        return True
    if lowered in ("false", "0"):
        return False
    raise ArgumentError(f"config key {name!r}: expected true/false, got {raw!r}")


def parse_value(key: Key, name: str, raw: str):
    try:
        if key.kind == "int":
            return int(raw)
        if key.kind == "float":
            return float(raw)
        if key.kind == "bool":
            return _parse_bool(raw, name)
        if key.kind == "str":
            return raw
        if key.kind == "choice":
            if raw not in key.choices:
                raise ArgumentError(
                    f"config key {name!r}: expected one of {', '.join(key.choices)}, got {raw!r}"
                )
            return raw
        if key.kind == "int_list":
            return [int(part.strip()) for part in raw.split(",") if part.strip()]
        if key.kind == "float_list":
            return [float(part.strip()) for part in raw.split(",") if part.strip()]
    except ArgumentError:
        raise
    except ValueError:
        raise ArgumentError(
            f"config key {name!r}: cannot parse {raw!r} as {key.kind}"
        ) from None
    raise ArgumentError(f"schema kind {key.kind!r} for key {name!r} is not supported")


def load_config(path) -> dict:
    """Read raw key -> (value, line) pairs from a config file."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}: line {lineno} is not a 'key = value' pair")
            name, value = line.split("=", 1)
            name = name.strip()
            value = value.strip()
            if not name:
                raise FormatError(f"{path}: empty key on line {lineno}")
            if name in raw:
                raise FormatError(
                    f"{path}: duplicate key {name!r} on line {lineno} "
                    f"(first set on line {raw[name][1]})"
                )
            raw[name] = (value, lineno)
    return raw


def resolve(schema: dict, raw: dict, overrides: dict, command: str) -> dict:
    """Validate raw config against a schema, apply overrides and defaults.

    ``overrides`` (from command-line flags) win over file values and skip
    string parsing; a None override is ignored.
    """
    for name in raw:
        if name not in schema:
            raise ArgumentError(
                f"unknown config key {name!r} for command {command!r}"
            )
    out = {}
    for name, key in schema.items():
        override = overrides.get(name)
        if override is not None:
            out[name] = override
        elif name in raw:
            out[name] = parse_value(key, name, raw[name][0])
        elif key.default is not REQUIRED:
            out[name] = key.default
        else:
            raise ArgumentError(
                f"command {command!r} requires config key {name!r}"
            )
    return out
