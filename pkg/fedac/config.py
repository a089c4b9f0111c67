import logging
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application
    app_name: str = "FedAC simulator"
    app_version: str = "1.0.0"
    debug: bool = False

    # Artifacts
    output_dir: str = "./runs"
    float_format: str = "%.17g"  # round-trips float64 exactly

    # Concurrency Control
    max_workers: int = 4  # Threads for client local updates within a round
    max_concurrent_runs: int = 2  # Sweep points executed at once

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="FEDAC_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # Ignore unrelated variables in .env
    )


# Global settings instance
settings = Settings()

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def get_settings() -> Settings:
    """Get the current settings instance."""
    return settings


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Configure the root logger from settings (idempotent)."""
    level_name = (level or settings.log_level).upper()
    handlers: list = [logging.StreamHandler()]
    target = log_file or settings.log_file
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(target, encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        datefmt="%H:%M:%S",
        handlers=handlers,
        force=True,
    )
