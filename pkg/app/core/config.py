"""
Application settings
Defaults can be overridden from the environment or a .env file (HBOA_ prefix)
"""

from functools import lru_cache

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime defaults for the CLI and the experiment engine"""

    model_config = SettingsConfigDict(
        env_prefix="HBOA_",
        env_file=".env",
        extra="ignore",
    )

    log_level: str = Field(
        "INFO",
        validation_alias=AliasChoices("HBOA_LOG_LEVEL", "LOG_LEVEL"),
    )

    # Parameter-less scheduler
    default_budget: int = 10**8
    base_population: int = 10
    schedule_k: int = 2

    # Harness
    bisection_ceiling: int = 2**22
    bisection_runs: int = 30
    experiment_runs: int = 100
    oracle_max_spins: int = 26
    best_known_path: str = "data/best_known.json"


@lru_cache
def get_settings() -> Settings:
    return Settings()
