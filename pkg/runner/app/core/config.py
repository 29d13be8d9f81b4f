from typing import Optional
from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
_ENV_PATH = Path(__file__).resolve().parents[3] / ".env"


class Settings(BaseSettings):
    """Process-level settings, read from QFILTER_* environment variables and .env"""

    model_config = SettingsConfigDict(
        env_prefix="QFILTER_",
        env_file=str(_ENV_PATH),
        extra="ignore",
    )

    # Replaces run.seed when set (CI pins seeds this way)
    SEED: Optional[int] = None

    LOG_LEVEL: str = "INFO"
    WORKERS: int = 1
    OUTPUT_DIR: str = "runs"


def get_settings() -> Settings:
    """Fresh settings; reads the environment at call time."""
    return Settings()

