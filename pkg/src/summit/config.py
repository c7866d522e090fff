"""Operator configuration with flags > environment > config file precedence.

The config file is YAML with nested sections (backend, knowledge,
faithfulness, run); environment variables SUMMIT_API_KEY, SUMMIT_BASE_URL,
and SUMMIT_MODEL cover the live-backend essentials.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .backend import ENV_API_KEY, ENV_BASE_URL, ENV_MODEL
from .errors import ConfigError


def load_config_file(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must be a mapping at the top level")
    return data


def _pick(*candidates):
    """First candidate that is not None."""
    for value in candidates:
        if value is not None:
            return value
    return None


@dataclass
class BackendSettings:
    base_url: str | None
    api_key: str
    model: str
    rpm: int | None
    timeout: float
    max_attempts: int
    cache: Path | None


def resolve_backend_settings(
    file_config: dict,
    *,
    base_url: str | None = None,
    model: str | None = None,
    rpm: int | None = None,
    timeout: float | None = None,
    max_attempts: int | None = None,
    cache: str | None = None,
) -> BackendSettings:
    section = file_config.get("backend") or {}
    resolved_cache = _pick(cache, section.get("cache"))
    return BackendSettings(
        base_url=_pick(base_url, os.environ.get(ENV_BASE_URL), section.get("base_url")),
        api_key=os.environ.get(ENV_API_KEY, ""),
        model=_pick(model, os.environ.get(ENV_MODEL), section.get("model"), "default"),
        rpm=_pick(rpm, section.get("rpm")),
        timeout=float(_pick(timeout, section.get("timeout"), 120.0)),
        max_attempts=int(_pick(max_attempts, section.get("max_attempts"), 4)),
        cache=Path(resolved_cache) if resolved_cache else None,
    )
