import logging

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    log: str = "INFO"
    default_seed: int = 7
    anfis_rule_cap: int = 4096
    anfis_underflow_floor: float = 1e-300
    anfis_sigma_floor: float = 1e-6
    replay_queue_size: int = 64

    model_config = SettingsConfigDict(env_prefix="OZ_SENTINEL_", env_file=".env", extra="ignore")


settings = Settings()


def configure_logging(level: str | None = None) -> None:
    """Route log records to stderr at the configured level."""
    name = (level or settings.log).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
