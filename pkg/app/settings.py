"""Application settings for the PKD laboratory."""
from pydantic_settings import BaseSettings
from pydantic import field_validator, model_validator
from typing import Literal, Optional


class Settings(BaseSettings):
    """Application configuration from environment variables."""

    # Environment
    ENV: Literal["dev", "staging", "prod"] = "dev"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["json", "text"] = "json"  # JSON for production
    LOG_FILE: Optional[str] = None  # Optional file logging

    # Seed fallback when --seed is not given
    PKD_SEED: Optional[int] = None

    # Monte Carlo
    MC_MAX_ROUNDS: int = 10**8  # desk-scale cap, larger N goes to keyrate
    API_MAX_ROUNDS: int = 10**6
    MC_SHARD_ROUNDS: int = 65536  # fixed shard size, results independent of workers
    MC_WORKERS: int = 1

    # Quadrature nodes for periodic integrands
    QUADRATURE_NODES: int = 4096

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "allow"

    @field_validator('LOG_LEVEL')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate LOG_LEVEL names a logging level."""
        if v.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"LOG_LEVEL must be a logging level name, got {v!r}")
        return v.upper()

    @model_validator(mode='after')
    def validate_production_settings(self):
        """Validate production-specific requirements."""
        if self.ENV == "prod" and self.LOG_FORMAT != "json":
            raise ValueError("LOG_FORMAT must be 'json' in production")
        return self

    def validate_required_for_env(self) -> None:
        """
        Validate all numeric limits for the current environment.

        Raises:
            ValueError: If any limit is out of range
        """
        errors = []

        if self.MC_SHARD_ROUNDS < 1:
            errors.append("MC_SHARD_ROUNDS must be at least 1")
        if self.MC_WORKERS < 1:
            errors.append("MC_WORKERS must be at least 1")
        if self.QUADRATURE_NODES < 16:
            errors.append("QUADRATURE_NODES must be at least 16")
        if self.API_MAX_ROUNDS > self.MC_MAX_ROUNDS:
            errors.append("API_MAX_ROUNDS cannot exceed MC_MAX_ROUNDS")
        if self.PKD_SEED is not None and self.PKD_SEED < 0:
            errors.append("PKD_SEED must be non-negative")

        if errors:
            raise ValueError(
                "Configuration validation failed:\n" + "\n".join(f"  - {e}" for e in errors)
            )


# Singleton settings instance
settings = Settings()
