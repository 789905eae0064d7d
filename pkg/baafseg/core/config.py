"""
Configuration settings for baafseg.

This module loads configuration from environment variables with sensible defaults.
"""

from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings."""

    # Application settings
    APP_NAME: str = "baafseg"
    LOG_LEVEL: str = "INFO"
    RUNS_DIR: str = "runs"

    # Numerics
    DTYPE: Literal["float32", "float64"] = "float32"
    THREADS: int = 1
    DETERMINISTIC: bool = True

    # Layer constants
    BN_EPSILON: float = 1e-5
    BN_MOMENTUM: float = 0.9
    LEAKY_SLOPE: float = 0.01
    BCE_CLAMP: float = 1e-7

    # Synthetic data
    LESION_MAX_RETRIES: int = 50

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        env_prefix="BAAF_",
        extra="ignore",
    )

    @field_validator("LOG_LEVEL")
    def validate_log_level(cls, v: str) -> str:
        v = v.upper()
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v not in valid_levels:
            raise ValueError(f"LOG_LEVEL must be one of {', '.join(valid_levels)}")
        return v

    @field_validator("THREADS")
    def validate_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("THREADS must be at least 1")
        return v

    @property
    def worker_threads(self) -> int:
        """Thread-pool size; deterministic runs stay serial."""
        return 1 if self.DETERMINISTIC else self.THREADS


# Create settings instance
settings = Settings()
