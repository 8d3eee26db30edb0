"""
Application Settings
Configuration management using Pydantic settings

Purpose: Centralized configuration for precision, caps, parallelism and output
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory settings, overridable through RRLAB_* environment variables"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="RRLAB_",
        case_sensitive=True,
        extra="ignore",
    )

    # Precision
    PRECISION_BITS: int = 256
    GUARD_BITS: int = 32

    # Representability caps
    MAX_INTEGER_BITS: int = 2**30
    GOLDEN_POWER_CAP: int = 10**7

    # Parallelism
    THREADS: int = 4

    # Output
    OUTPUT_DIR: str = "./rrlab_output"
    SEED: int = 20240101
    SCHEMA_VERSION: str = "rrlab-v1"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"


# Global settings instance
_settings = None


def get_settings() -> Settings:
    """Get laboratory settings (singleton)"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings():
    """Reset the settings cache"""
    global _settings
    _settings = None
