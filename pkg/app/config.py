"""
Configuration Management
Centralized settings using Pydantic for validation, plus the JSON run config with dotted overrides
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.errors import ConfigError


class Settings(BaseSettings):
    """Application Configuration"""

    model_config = SettingsConfigDict(
        env_prefix="VWA_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    # Logging (VWA_LOG zet de verbosity)
    log_level: str = Field(
        default="WARNING", validation_alias=AliasChoices("VWA_LOG", "log_level")
    )

    # Reproducibility
    default_seed: int = 0

    # Attention defaults
    default_heads: int = 8

    # Analysis
    erf_samples: int = 16
    gradcheck_eps: float = 1e-5
    gradcheck_tolerance: float = 1e-4

    # Execution
    max_workers: int = 4
    output_dir: str = "runs"


# Global settings instance
settings = Settings()


# Short override keys, resolved at the last path segment
KEY_ALIASES = {"C": "channels", "P": "window", "R": "ratio", "h": "heads"}


def parse_value(text: str) -> Any:
    """JSON when it parses, the raw string otherwise"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: Dict[str, Any], override: str) -> Dict[str, Any]:
    """
    Zet een dotted key=value in de ruwe config dict

    attn.R=4 wordt {"attn": {"ratio": 4}}; tussenliggende secties worden aangemaakt.
    """
    key, sep, value = override.partition("=")
    if not sep or not key:
        raise ConfigError(f"override '{override}' is not key=value")
    path = key.strip().split(".")
    path[-1] = KEY_ALIASES.get(path[-1], path[-1])

    node = raw
    for part in path[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"override '{key}': '{part}' is not a section")
        node = child
    node[path[-1]] = parse_value(value)
    return raw


def load_raw_config(path: Optional[Path], overrides: Iterable[str] = ()) -> Dict[str, Any]:
    """Parse the JSON config file (if any) and apply overrides in order"""
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for override in overrides:
        apply_override(raw, override)
    return raw
