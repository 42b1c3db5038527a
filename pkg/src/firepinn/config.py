"""Runtime settings for firepinn."""
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator

from firepinn.errors import ArtifactError


class AppSettings(BaseModel):
    """Settings shared by every subcommand."""

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Logging level"
    )
    enable_debug_mode: bool = Field(
        default=False,
        description="Enable debug mode"
    )
    out_dir: str = Field(
        default="./output",
        description="Directory receiving all artifacts"
    )
    threads: int = Field(
        default=1,
        ge=1,
        description="Worker cap for parallel sections"
    )
    seed: int = Field(
        default=0,
        ge=0,
        description="Seed for initialization and sampling"
    )

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator('log_level', mode='before')
    @classmethod
    def normalize_level(cls, v):
        return v.upper() if isinstance(v, str) else v

    @field_validator('out_dir')
    @classmethod
    def validate_out_dir(cls, v):
        if not v or not v.strip():
            raise ValueError("Output directory cannot be empty")
        return v


# Keys accepted in the settings file
FILE_KEYS = {
    'LOG_LEVEL': 'log_level',
    'ENABLE_DEBUG_MODE': 'enable_debug_mode',
    'OUT_DIR': 'out_dir',
    'THREADS': 'threads',
    'SEED': 'seed',
}


def _convert(key: str, value: str) -> Any:
    if key == 'enable_debug_mode':
        return value.lower() in ('true', '1', 'yes', 'on')
    if key in ('threads', 'seed'):
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"Invalid integer value for {key}: {value}")
    return value


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> AppSettings:
    """
    Load settings from an optional .env-format file plus explicit overrides.

    The file is read without touching the process environment; command-line
    values given in ``overrides`` win over file values. ``None`` overrides are
    ignored.

    Args:
        config_path: Path to a .env-format file, or None for defaults only
        overrides: Values taken from command-line flags

    Returns:
        AppSettings: Validated settings

    Raises:
        ArtifactError: If ``config_path`` names a missing file
        ValueError: If a file value cannot be converted
        ValidationError: If a setting is out of range
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        if not Path(config_path).is_file():
            raise ArtifactError("settings file not found", path=config_path)
        for name, value in dotenv_values(config_path).items():
            key = FILE_KEYS.get(name.upper())
            if key is None:
                raise ValueError(f"Unknown setting {name} in {config_path}")
            if value is not None:
                data[key] = _convert(key, value)

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    return AppSettings(**data)
