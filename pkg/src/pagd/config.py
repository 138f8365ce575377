"""Flat `key = value` configuration files with typed coercion.

The format is deliberately minimal: one assignment per line, `#` starts a
comment, blank lines are ignored, list values are comma separated.  Every
experiment declares its keys; unknown keys are an error so typos fail fast.
"""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


def parse_kv_file(path) -> dict[str, str]:
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = stripped.split("=", 1)
            raw[key.strip()] = value.strip()
    return raw


def coerce_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def coerce_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def coerce_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def coerce_float_list(text: str) -> tuple[float, ...]:
    return tuple(coerce_float(part) for part in str(text).split(",") if part.strip())


def coerce_int_list(text: str) -> tuple[int, ...]:
    return tuple(coerce_int(part) for part in str(text).split(",") if part.strip())


def coerce_str(text: str) -> str:
    return text


@dataclass(frozen=True)
class FieldSpec:
    """One configurable key: its coercion function and help text."""

    coerce: callable
    help: str


def apply_updates(defaults: dict, updates: dict[str, str], fields: dict[str, FieldSpec]):
    """Coerce `updates` against `fields` on top of `defaults`."""
    merged = dict(defaults)
    for key, text in updates.items():
        if key not in fields:
            known = ", ".join(sorted(fields))
            raise ConfigError(f"unknown key {key!r}; known keys: {known}")
        merged[key] = fields[key].coerce(text)
    return merged
