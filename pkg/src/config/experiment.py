"""Experiment configuration loaded from JSON.

SystemParams fields sit at the top level of the document; every command has its
own section with its sweep grid.
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.errors import ConfigError
from src.core.params import SystemParams

logger = logging.getLogger(__name__)

DEFAULT_THETAS = [0.001, 0.01, 0.1]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Fig2Config(_Section):
    sigma_grid: list[float] = Field(default_factory=lambda: [float(s) for s in range(1, 21)])


class Fig3Config(_Section):
    d_max_grid: list[float] = Field(default_factory=lambda: [100.0, 200.0, 300.0, 400.0, 500.0])
    thetas: list[float] = Field(default_factory=lambda: list(DEFAULT_THETAS))


class Fig4Mechanism(str, Enum):
    """What moves when fig4 sweeps the NF/FF boundary."""

    THRESHOLD = "threshold"  # scheduler switch only; apertures and the physical d_F stay fixed
    APERTURE = "aperture"  # L_t rescaled so the physical d_F itself moves


class Fig4Config(_Section):
    mechanism: Fig4Mechanism = Fig4Mechanism.THRESHOLD
    d_f_grid: list[float] = Field(default_factory=lambda: [20.0, 40.0, 60.0, 80.0, 100.0])
    sigma_series: list[float] = Field(default_factory=lambda: [1.0, 5.0, 10.0])


class Fig5Config(_Section):
    sigma_grid: list[float] = Field(default_factory=lambda: [float(s) for s in range(0, 21, 2)])
    thetas: list[float] = Field(default_factory=lambda: list(DEFAULT_THETAS))


class CrlbConfig(_Section):
    shape: str = "rect"
    bandwidth_hz: float = 100e6
    rolloff: float = 0.25
    sample_rate_hz: float = 400e6
    distance_m: float = 30.0
    gammas: list[float] = Field(default_factory=lambda: [10.0, 30.0, 100.0, 300.0, 1000.0])
    n_trials: int = 10_000
    n_fft: int = 1024


class MonteCarloConfig(_Section):
    samples: Optional[int] = None
    seed: Optional[int] = None


class QueueConfig(_Section):
    theta: float = 0.01
    arrival_fractions: list[float] = Field(default_factory=lambda: [0.5, 0.8, 0.95])
    horizon: int = 1_000_000


class ValidateConfig(_Section):
    thetas: list[float] = Field(default_factory=lambda: list(DEFAULT_THETAS))
    conditional_distance_m: float = 30.0
    spectral_configurations: int = 5
    include_queue: bool = True


class ExperimentConfig(BaseModel):
    """Link parameters plus per-command sections."""

    model_config = ConfigDict(extra="forbid")

    params: SystemParams = Field(default_factory=SystemParams)
    fig2: Fig2Config = Field(default_factory=Fig2Config)
    fig3: Fig3Config = Field(default_factory=Fig3Config)
    fig4: Fig4Config = Field(default_factory=Fig4Config)
    fig5: Fig5Config = Field(default_factory=Fig5Config)
    crlb: CrlbConfig = Field(default_factory=CrlbConfig)
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    queue: QueueConfig = Field(default_factory=QueueConfig)
    validate_: ValidateConfig = Field(default_factory=ValidateConfig, alias="validate")

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Split top-level SystemParams fields from the command sections.

        Raises:
            ConfigError: unknown keys or values of the wrong type
        """
        param_fields = set(SystemParams.model_fields)
        params = {k: v for k, v in data.items() if k in param_fields}
        sections = {k: v for k, v in data.items() if k not in param_fields}
        try:
            return cls.model_validate({"params": SystemParams(**params), **sections})
        except ValidationError as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    def with_params(self, **updates: Any) -> "ExperimentConfig":
        """Copy with SystemParams fields overridden (CLI flags)."""
        updates = {k: v for k, v in updates.items() if v is not None}
        if not updates:
            return self
        return self.model_copy(update={"params": self.params.model_copy(update=updates)})


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read a JSON configuration file; no path gives the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    logger.info(f"Loaded configuration from {path}")
    return ExperimentConfig.from_mapping(data)
