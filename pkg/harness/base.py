"""Bundled experiment presets."""

import logging
from pathlib import Path
from typing import Union

from config import ConfigError

logger = logging.getLogger("ced-schrodinger")

# Presets directory
PRESETS_DIR = Path(__file__).parent.parent / "presets"

PRESET_SUFFIX = ".conf"


def list_presets() -> list[str]:
    """Names of the bundled presets, sorted."""
    if not PRESETS_DIR.is_dir():
        logger.warning(f"Presets directory not found: {PRESETS_DIR}")
        return []
    return sorted(p.stem for p in PRESETS_DIR.glob(f"*{PRESET_SUFFIX}"))


def preset_description(name: str) -> str:
    """First comment line of a preset file, without the leading '#'."""
    path = PRESETS_DIR / f"{name}{PRESET_SUFFIX}"
    if not path.exists():
        raise ConfigError(f"Unknown preset '{name}'")
    for line in path.read_text().splitlines():
        line = line.strip()
        if line.startswith("#"):
            return line.lstrip("#").strip()
        if line:
            break
    return ""


def resolve_preset(name_or_path: Union[str, Path]) -> Path:
    """An existing file path, or the bundled preset with that name.

    Args:
        name_or_path: Path to a config file, or a preset name like 'linear-ced'

    Returns:
        Path to the config file
    """
    path = Path(name_or_path)
    if path.is_file():
        return path

    name = path.name
    if name.endswith(PRESET_SUFFIX):
        name = name[: -len(PRESET_SUFFIX)]
    preset = PRESETS_DIR / f"{name}{PRESET_SUFFIX}"
    if preset.is_file():
        logger.debug(f"Using bundled preset {preset}")
        return preset

    available = ", ".join(list_presets()) or "none"
    raise ConfigError(f"No config file or preset named '{name_or_path}' (presets: {available})")
