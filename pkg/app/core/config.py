"""
Configuration for the space-time FEM toolkit.

Two layers:
  * ``Settings``: process-wide defaults (output/log directories, solver
    defaults), read from ``config/settings.json`` and environment variables.
  * ``StudyConfig``: one experiment (problem preset, scheme, levels, solver,
    outputs), read from a TOML or JSON file and overridden by CLI flags.
"""

import os
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

APP_DIR = Path(__file__).resolve().parent.parent.parent


class Settings(BaseModel):
    """
    Process-wide defaults.
    """
    app_name: str = "stfem"
    app_version: str = "1.0.0"
    app_dir: str = str(APP_DIR)

    output_dir: str = "output"
    log_dir: str = "logs"

    solver_tol: float = Field(default=1e-10, gt=0)
    solver_restart: int = Field(default=50, ge=1)
    dense_threshold: int = Field(default=2000, ge=1)
    deterministic: bool = True

    # Desk-scale caps on the finest level (h = 2^-level)
    max_level_3d: int = 5
    max_level_2d: int = 8


def load_settings_from_json(path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Load overrides from ``config/settings.json``; missing file means no overrides.
    """
    config_path = Path(path) if path else APP_DIR / "config" / "settings.json"
    if not config_path.exists():
        logger.debug(f"[CONFIG] {config_path} not found, using defaults")
        return {}
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"[CONFIG] cannot read {config_path}: {e}")
        return {}


_ENV_OVERRIDES = {
    "STFEM_OUTPUT_DIR": "output_dir",
    "STFEM_LOG_DIR": "log_dir",
    "STFEM_SOLVER_TOL": "solver_tol",
    "STFEM_DENSE_THRESHOLD": "dense_threshold",
}


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Cached settings: JSON file first, environment variables on top.
    """
    values = load_settings_from_json()
    for env_name, field_name in _ENV_OVERRIDES.items():
        if os.getenv(env_name):
            values[field_name] = os.environ[env_name]
    try:
        return Settings(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid settings: {e}") from e


# ---------------------------------------------------------------------------
# Study configuration
# ---------------------------------------------------------------------------

SchemeName = Literal["sd", "eafe", "eafe_high"]
PreconditionerName = Literal["none", "jacobi", "ilu0", "gauss_seidel"]


class ProblemSection(BaseModel):
    preset: str = "heat2d"
    eps: float = Field(default=1e-5, gt=0)
    kappa: float = Field(default=1.0, gt=0)
    beta: Optional[float] = None
    space_dim: Optional[int] = Field(default=None, ge=1, le=2)


class SchemeSection(BaseModel):
    name: SchemeName = "eafe"
    order: int = Field(default=1, ge=1, le=2)
    theta: float = Field(default=1e-2, ge=0)
    lump_mass: bool = False


class LevelsSection(BaseModel):
    start: int = Field(default=1, ge=0)
    stop: int = Field(default=4, ge=0)
    large: bool = False

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError(f"levels.stop ({self.stop}) < levels.start ({self.start})")
        return self


class SolverSection(BaseModel):
    method: Literal["auto", "dense", "gmres"] = "auto"
    preconditioner: PreconditionerName = "ilu0"
    tol: float = Field(default=1e-10, gt=0)
    restart: int = Field(default=50, ge=1)
    max_iter: int = Field(default=1000, ge=1)


class OutputSection(BaseModel):
    directory: str = "output"
    csv: Optional[str] = "convergence.csv"
    vtk: Optional[str] = None
    slice_axis: int = Field(default=0, ge=0)
    slice_value: Optional[float] = None
    deterministic: bool = True
    dump_elements: List[int] = Field(default_factory=list)

    @field_validator("dump_elements")
    @classmethod
    def _non_negative(cls, v):
        if any(e < 0 for e in v):
            raise ValueError("dump_elements must be non-negative element ids")
        return v


class StudyConfig(BaseModel):
    problem: ProblemSection = Field(default_factory=ProblemSection)
    scheme: SchemeSection = Field(default_factory=SchemeSection)
    levels: LevelsSection = Field(default_factory=LevelsSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    output: OutputSection = Field(default_factory=OutputSection)
    seed: int = 0


def load_study_config(path) -> StudyConfig:
    """
    Read a study configuration from ``.toml`` or ``.json``.

    Raises:
        ConfigError: missing file, parse failure or validation failure.
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    try:
        if config_path.suffix.lower() == ".json":
            with open(config_path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        else:
            with open(config_path, "rb") as f:
                raw = tomllib.load(f)
    except (OSError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {config_path}: {e}") from e

    try:
        config = StudyConfig(**raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {config_path}: {e}") from e
    logger.info(f"[CONFIG] loaded {config_path} (preset={config.problem.preset}, scheme={config.scheme.name})")
    return config


def apply_overrides(config: StudyConfig, overrides: Dict[str, Dict[str, Any]]) -> StudyConfig:
    """
    Return a copy of ``config`` with ``{section: {key: value}}`` overrides applied.
    ``None`` values are ignored so unset CLI flags keep the file values.
    """
    data = config.model_dump()
    for section, values in overrides.items():
        if section not in data:
            if values is not None:
                data[section] = values
            continue
        if isinstance(data[section], dict):
            for key, value in values.items():
                if value is not None:
                    data[section][key] = value
        elif values is not None:
            data[section] = values
    try:
        return StudyConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid option: {e}") from e
