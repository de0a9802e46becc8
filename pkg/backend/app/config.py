"""Application configuration loaded from environment variables.

Uses Pydantic Settings to validate and provide typed access to the runtime
knobs shared by the simulation engines, the experiment harness, the CLI and
the HTTP API.
"""

from __future__ import annotations

import logging
import os
from enum import Enum

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class EnvironmentType(str, Enum):
    """Valid deployment environments."""

    DEVELOPMENT = "development"
    PRODUCTION = "production"


class LogLevel(str, Enum):
    """Valid logging levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


class OutputFormat(str, Enum):
    """Serialization formats for result tables."""

    CSV = "csv"
    JSON = "json"


LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
LOG_DATEFMT = "%Y-%m-%dT%H:%M:%S"


class Settings(BaseSettings):
    """Application settings loaded from environment variables.

    Every variable is optional; defaults reproduce the published experiment
    protocol (one trace sample per proposal, six significant digits in tables).
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    ENVIRONMENT: EnvironmentType = Field(
        default=EnvironmentType.DEVELOPMENT,
        description="Deployment environment: development or production.",
    )

    # ------------------------------------------------------------------
    # Logging
    # ------------------------------------------------------------------
    LOG_LEVEL: LogLevel = Field(
        default=LogLevel.INFO,
        description="Application logging level.",
    )

    # ------------------------------------------------------------------
    # Simulation
    # ------------------------------------------------------------------
    WORKERS: int = Field(
        default=0,
        ge=0,
        description="Worker processes for replications; 0 means available parallelism.",
    )
    TRACE_DECIMATION: int = Field(
        default=1,
        ge=1,
        description="Record every s-th proposal in run traces.",
    )
    RECORD_ACCEPTANCE_PROB: bool = Field(
        default=False,
        description="Record the ex-ante acceptance probability series (O(n) per proposal).",
    )
    ENUMERATION_MAX_AGENTS: int = Field(
        default=10,
        ge=1,
        description="Largest side size the brute-force stable matching enumeration accepts.",
    )
    LAZY_SUGGEST_BUDGET: float = Field(
        default=1e7,
        gt=0,
        description="Proposal budget n*sqrt(d) above which the CLI suggests the lazy engine.",
    )

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------
    OUTPUT_FORMAT: OutputFormat = Field(
        default=OutputFormat.CSV,
        description="Default table format when --format is not given.",
    )
    FLOAT_SIG_DIGITS: int = Field(
        default=6,
        ge=1,
        le=17,
        description="Significant digits for floats in emitted tables.",
    )

    # ------------------------------------------------------------------
    # Server / API
    # ------------------------------------------------------------------
    API_PORT: int = Field(
        default=8000,
        description="Port for the HTTP API server (uvicorn).",
    )
    API_PREFIX: str = Field(
        default="/api",
        description="Prefix for all API routes.",
    )
    CORS_ORIGINS: str = Field(
        default="http://localhost:5173",
        description="Comma-separated list of allowed CORS origins.",
    )
    MAX_API_REPS: int = Field(
        default=2000,
        ge=1,
        description="Largest replication count a single API request may ask for.",
    )

    # ------------------------------------------------------------------
    # Validators
    # ------------------------------------------------------------------
    @field_validator("API_PREFIX")
    @classmethod
    def validate_api_prefix(cls, v: str) -> str:
        """Ensure the API prefix starts with a forward slash and has no trailing slash."""
        if not v.startswith("/"):
            v = f"/{v}"
        return v.rstrip("/")

    # ------------------------------------------------------------------
    # Computed helpers
    # ------------------------------------------------------------------
    @property
    def cors_origins_list(self) -> list[str]:
        """Return CORS origins as a list of strings."""
        return [origin.strip() for origin in self.CORS_ORIGINS.split(",") if origin.strip()]

    @property
    def effective_workers(self) -> int:
        """Resolve ``WORKERS=0`` to the number of available CPUs."""
        return self.WORKERS or (os.cpu_count() or 1)

    @property
    def is_development(self) -> bool:
        """Return ``True`` when running in development mode."""
        return self.ENVIRONMENT == EnvironmentType.DEVELOPMENT


def get_settings() -> Settings:
    """Create and return a validated ``Settings`` instance.

    Reads from environment variables and an optional ``.env`` file in the
    working directory.

    Raises:
        pydantic.ValidationError: If a variable is present but invalid.
    """
    return Settings()


def configure_logging(settings: Settings) -> None:
    """Configure the root logger from settings (called once by CLI and API)."""
    logging.basicConfig(
        level=settings.LOG_LEVEL.value,
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        force=True,
    )
