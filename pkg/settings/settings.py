from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Settings class for application configuration.

    Values are read from the environment with the ``UNICO_`` prefix,
    e.g. ``UNICO_THREADS=4`` or ``UNICO_CHECKPOINT=/models/desk.ckpt``.
    """
    model_config = SettingsConfigDict(env_prefix="UNICO_")

    threads: int = 1
    log_level: str = "INFO"
    checkpoint: Optional[str] = None
    default_threshold: float = 0.5

    @property
    def worker_count(self) -> int:
        return max(1, self.threads)


settings = Settings()
