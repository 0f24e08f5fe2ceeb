"""
settings - Configuration layer.

Defaults ship in `config/defaults.yaml`; environment variables override the
file and explicit keyword overrides (the CLI flags) override both. The
resulting `AnalysisSettings` is frozen and handed down to every phase.
"""

import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from equiv_guard.models import ALL_SMELLS, AnalysisMode, Smell

logger = logging.getLogger(__name__)

DEFAULTS_FILE = Path(__file__).parent / "config" / "defaults.yaml"

ENV_EXPLORER_KEY = "EQUIVGUARD_EXPLORER_KEY"
ENV_SOLVER = "EQUIVGUARD_SOLVER"
ENV_CACHE_DIR = "EQUIVGUARD_CACHE_DIR"
ENV_SOLC = "EQUIVGUARD_SOLC"


class AnalysisSettings(BaseModel):
    """Every tunable the pipeline reads."""
    model_config = ConfigDict(frozen=True)

    mode: AnalysisMode = Field(default=AnalysisMode.FULL, description="Which filtering stages run")
    detectors: List[Smell] = Field(default_factory=lambda: list(ALL_SMELLS))
    timeout_s: float = Field(default=60.0, gt=0, description="Per-contract wall-clock budget")
    solver_timeout_s: float = Field(default=5.0, gt=0, description="Per solver query")
    unroll: int = Field(default=2, ge=0, description="Loop unrolling bound K")
    max_steps: int = Field(default=200_000, gt=0, description="Symbolic instruction budget per execution")
    taint_depth_bound: int = Field(default=64, gt=0)
    path_cap: int = Field(default=10_000, gt=0)
    jump_target_bound: int = Field(default=8, gt=0)
    tdt_interval_threshold: int = Field(default=256, ge=0)
    bhm_height_threshold: int = Field(default=1_000_000, ge=0)
    optimizer: bool = False
    optimizer_runs: int = 200
    cache_dir: Path = Field(default=Path("~/.cache/equiv_guard").expanduser())
    solver_path: Optional[str] = Field(default=None, description="External SMT-LIB2 solver binary")
    solc_path: Optional[str] = Field(default=None, description="Explicit solc binary, bypasses version lookup")
    explorer_key: Optional[str] = Field(default=None, repr=False)
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, gt=0)

    @field_validator("detectors", mode="before")
    @classmethod
    def _split_detectors(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [Smell.parse(part) for part in value.split(",") if part.strip()]
        return [Smell.parse(v) if isinstance(v, str) else v for v in value]

    @field_validator("cache_dir", mode="before")
    @classmethod
    def _expand_cache_dir(cls, value: Any) -> Any:
        return Path(value).expanduser() if value is not None else value


@lru_cache(maxsize=1)
def _file_defaults() -> Dict[str, Any]:
    with open(DEFAULTS_FILE, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    flat: Dict[str, Any] = {}
    flat.update(raw.get("analysis", {}))
    flat.update(raw.get("bounds", {}))
    flat.update(raw.get("thresholds", {}))
    flat.update(raw.get("compiler", {}))
    if "dir" in raw.get("cache", {}):
        flat["cache_dir"] = raw["cache"]["dir"]
    return flat


def _env_overrides() -> Dict[str, Any]:
    found: Dict[str, Any] = {}
    if os.getenv(ENV_EXPLORER_KEY):
        found["explorer_key"] = os.getenv(ENV_EXPLORER_KEY)
    if os.getenv(ENV_SOLVER):
        found["solver_path"] = os.getenv(ENV_SOLVER)
    if os.getenv(ENV_CACHE_DIR):
        found["cache_dir"] = os.getenv(ENV_CACHE_DIR)
    if os.getenv(ENV_SOLC):
        found["solc_path"] = os.getenv(ENV_SOLC)
    return found


def load_settings(**overrides: Any) -> AnalysisSettings:
    """Build settings from the defaults file, the environment and `overrides`.

    Args:
        **overrides: Field values that win over everything else. `None`
            values are ignored so CLI options left unset fall through.

    Returns:
        The frozen settings record.
    """
    values = dict(_file_defaults())
    values.update(_env_overrides())
    values.update({k: v for k, v in overrides.items() if v is not None})
    settings = AnalysisSettings(**values)
    logger.debug("settings: %s", settings)
    return settings
