from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_MATERIALIZE_CAP = 10**8


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=(".env", ".env.local"),
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    app_name: str = "ttnet"
    log_level: str = Field(default="INFO", alias="TTNET_LOG_LEVEL")
    threads: int = Field(default=0, ge=0, alias="TTNET_THREADS")
    materialize_cap: int = Field(
        default=DEFAULT_MATERIALIZE_CAP, ge=1, alias="TTNET_MATERIALIZE_CAP"
    )

    checkpoint_path: str | None = Field(default=None, alias="TTNET_CHECKPOINT_PATH")
    host: str = Field(default="0.0.0.0", alias="TTNET_HOST")
    port: int = Field(default=8000, alias="TTNET_PORT")
    request_id_header: str = Field(default="X-Request-Id", alias="TTNET_REQUEST_ID_HEADER")

    @property
    def checkpoint_file(self) -> Path | None:
        if not self.checkpoint_path:
            return None
        return Path(self.checkpoint_path).expanduser().resolve()


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
