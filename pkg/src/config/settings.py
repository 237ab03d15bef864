"""Runtime settings for the effective-capacity engine."""

from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    log_dir: str = Field(default="logs", description="Log directory for JSON traces")
    service_name: str = Field(default="nffec", description="Service name for logging")
    trace_enabled: bool = Field(default=True, description="Write JSON command traces")

    # Metrics
    metrics_textfile: Optional[str] = Field(
        default=None, description="Prometheus textfile written after each command"
    )

    # Quadrature
    quad_rel_tol: float = Field(default=1e-9, description="Relative tolerance")
    quad_abs_tol: float = Field(default=1e-12, description="Absolute tolerance")
    quad_max_subdivisions: int = Field(default=200, description="Max subintervals")
    gaussian_span: float = Field(
        default=12.0, description="Half-width of Gaussian integration windows in std devs"
    )

    # Monte Carlo
    mc_samples: int = Field(default=1_000_000, description="Slots per MC estimate")
    mc_seed: int = Field(default=20251017, description="Default MC seed")
    mc_batches: int = Field(default=100, description="Batches for batch-means SE")
    mc_workers: int = Field(default=4, description="Thread pool size for MC batches")

    # Sweeps / validation
    sweep_workers: int = Field(default=4, description="Thread pool size for sweep points")
    validation_se_multiplier: float = Field(
        default=3.0, description="Allowed analytic-vs-MC gap in standard errors"
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="NFFEC_",
        case_sensitive=False,
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
