"""Built-in presets shipped in presets.yml.

Thread-safety: loading uses functools.lru_cache, so the YAML file is read
once per process.
"""

import copy
from functools import lru_cache
from pathlib import Path
from typing import Any

import yaml

from .errors import InputError


class PresetError(InputError):
    """Raised when a preset is unknown or malformed."""

    pass


@lru_cache(maxsize=1)
def load_presets() -> dict[str, Any]:
    """Load presets.yml from the package directory."""
    presets_path = Path(__file__).parent / "presets.yml"
    with open(presets_path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise PresetError("presets.yml must contain a mapping of preset names")
    return data


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(load_presets()))


def get_preset(name: str) -> dict[str, Any]:
    """Return a deep copy of one preset, safe to mutate.

    Raises:
        PresetError: If the preset does not exist
    """
    presets = load_presets()
    if name not in presets:
        raise PresetError(
            f"Unknown preset '{name}'. Available: {', '.join(preset_names())}"
        )
    return copy.deepcopy(dict(presets[name]))
