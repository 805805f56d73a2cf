"""
Process configuration using Pydantic settings management.
Values come from environment variables or a local .env file; the
per-episode configuration lives in models.schemas.EpisodeConfig.
"""

from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")

    # Artifacts
    output_dir: str = Field(default="out", alias="NAV_OUTPUT_DIR")

    # Batch execution; 1 keeps every episode in-process
    jobs: int = Field(default=1, ge=1, alias="NAV_JOBS")

    # Extra directory searched for named scenarios before the bundled suite
    scenario_dir: Optional[str] = Field(default=None, alias="NAV_SCENARIO_DIR")


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.
    Uses lru_cache so the environment and .env file are read once per process.
    """
    return Settings()
