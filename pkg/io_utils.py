"""Utility functions for configuration ingestion and CSV output.

This module provides functions for:
- Loading the JSON run configuration (parameter overrides, K grid,
  tolerances, output directory, worker count) on top of a built-in preset
- Managing output directories
- Writing report frames to CSV with fixed 12-significant-digit formatting
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import pandas as pd

from config import (
    AI_PARAMS, CSV_FLOAT_FORMAT, HO_PARAMS, N_JOBS, OUTPUT_DIR,
    PRESET_APPENDIX_D, PRESETS,
)
from dynamics import GridSpec
from equilibrium import Tolerances
from primitives import EnvParams, ModelParams, SharedParams

TOP_LEVEL_KEYS = {"shared", "ho", "ai", "grid", "tolerances", "output_dir", "n_jobs", "format"}


class ConfigError(ValueError):
    """Raised for malformed or invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: Path = OUTPUT_DIR
    n_jobs: int = N_JOBS
    output_format: str = "csv"
    preset: str = PRESET_APPENDIX_D

    @property
    def is_reference(self) -> bool:
        """True when the parameters are exactly the preset defaults."""
        return self.params == ModelParams()


def _number(value, where: str, allow_none: bool = False) -> float | None:
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite, got {value}")
    return value


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _object(raw, where: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(raw).__name__}")
    return raw


def _block_values(raw, block: str, cls, aliases: dict[str, str] | None = None) -> dict:
    """Map a JSON block onto dataclass fields, rejecting unknown names."""
    raw = _object(raw, block)
    aliases = aliases or {}
    known = {f.name for f in fields(cls)}
    optional = {f.name for f in fields(cls) if f.default is None}
    values = {}
    for key, value in raw.items():
        name = aliases.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown field '{block}.{key}'")
        values[name] = _number(value, f"{block}.{key}", allow_none=name in optional)
    return values


def _load_params(raw: dict) -> ModelParams:
    shared = _block_values(raw.get("shared", {}), "shared", SharedParams, {"lambda": "lam"})
    ho = {**HO_PARAMS, **_block_values(raw.get("ho", {}), "ho", EnvParams)}
    ai = {**AI_PARAMS, **_block_values(raw.get("ai", {}), "ai", EnvParams)}
    try:
        return ModelParams(shared=SharedParams(**shared), ho=EnvParams(**ho), ai=EnvParams(**ai))
    except ValueError as e:
        raise ConfigError(f"invalid parameters: {e}") from e


def _load_grid(raw) -> GridSpec:
    raw = _object(raw, "grid")
    unknown = set(raw) - {"k_min", "k_max", "n"}
    if unknown:
        raise ConfigError(f"unknown field 'grid.{sorted(unknown)[0]}'")
    default = GridSpec()
    try:
        return GridSpec(
            k_min=_number(raw.get("k_min", default.k_min), "grid.k_min"),
            k_max=_number(raw.get("k_max", default.k_max), "grid.k_max"),
            n=_integer(raw.get("n", default.n), "grid.n"),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"invalid grid: {e}") from e


def _load_tolerances(raw) -> Tolerances:
    values = _block_values(raw, "tolerances", Tolerances)
    try:
        return Tolerances(**values)
    except ValueError as e:
        raise ConfigError(f"invalid tolerances: {e}") from e


def load_run_config(path: str | Path | None = None, preset: str = PRESET_APPENDIX_D) -> RunConfig:
    """Load a JSON run configuration on top of a built-in preset.

    Missing fields keep the preset values. `lambda` is accepted as the JSON
    spelling of the depreciation rate.

    Args:
        path: Path to a JSON config file, or None for the preset alone.
        preset: Built-in preset name.

    Returns:
        Validated RunConfig.

    Raises:
        ConfigError: If the preset is unknown, the file cannot be read or
            parsed, a block or field is unknown, or a value violates an
            invariant.
    """
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}' (available: {', '.join(sorted(PRESETS))})")
    if path is None:
        return RunConfig(preset=preset)

    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    raw = _object(raw, "config")
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config block '{sorted(unknown)[0]}'")

    output_format = raw.get("format", "csv")
    if output_format != "csv":
        raise ConfigError(f"format must be 'csv', got {output_format!r}")
    n_jobs = _integer(raw.get("n_jobs", N_JOBS), "n_jobs")
    if n_jobs == 0:
        raise ConfigError("n_jobs must be nonzero (-1 uses every core)")
    output_dir = raw.get("output_dir", str(OUTPUT_DIR))
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError(f"output_dir must be a non-empty string, got {output_dir!r}")

    return RunConfig(
        params=_load_params(raw),
        grid=_load_grid(raw.get("grid", {})),
        tolerances=_load_tolerances(raw.get("tolerances", {})),
        output_dir=Path(output_dir),
        n_jobs=n_jobs,
        output_format=output_format,
        preset=preset,
    )


def ensure_dir(path: str | Path) -> Path:
    """Create a directory (and parents) if it doesn't exist."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def records_frame(records: list) -> pd.DataFrame:
    """DataFrame with one row per dataclass record."""
    return pd.DataFrame([asdict(r) for r in records])


def save_frame(df: pd.DataFrame, path: str | Path) -> str:
    """Write a frame to CSV with a header row and fixed float formatting.

    Args:
        df: Frame to save.
        path: Destination file; parent directories are created as needed.

    Returns:
        Path to the written file as a string.
    """
    path = Path(path)
    ensure_dir(path.parent)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return str(path)


__all__ = [
    "ConfigError", "RunConfig", "load_run_config", "ensure_dir",
    "records_frame", "save_frame",
]
