from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Output
    output_dir: Path = Path("results")

    model_config = SettingsConfigDict(
        env_prefix="FREESTM_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()
