from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    # Application Settings
    app_name: str = "surfrig"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # Execution Settings
    threads: Optional[int] = Field(
        None,
        validation_alias=AliasChoices("SURFRIG_THREADS", "SURFHEAD_THREADS"),
        description="Worker threads; wins over --threads",
    )
    default_seed: int = 0

    # Observability Settings
    tracing_enabled: bool = False
    metrics_textfile: bool = False

    model_config = SettingsConfigDict(
        env_prefix="SURFRIG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        populate_by_name=True,
        extra="ignore",
    )

    def resolve_threads(self, cli_threads: Optional[int]) -> int:
        """Pick the worker count: environment first, then the CLI flag, then 1."""
        for value in (self.threads, cli_threads):
            if value is not None and value >= 1:
                return value
        return 1


settings = Settings()
