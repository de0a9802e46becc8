"""Health check router for Sparse Market Lab.

Provides endpoints for liveness probes and version information. The
service keeps no external connections, so /health only reports that the
process is serving requests.
"""

from __future__ import annotations

import logging

from fastapi import APIRouter

from app import __version__
from app.models.health import HealthResponse, VersionResponse

logger = logging.getLogger(__name__)

_BUILD_DATE = "2026-10-01T00:00:00Z"

router = APIRouter(tags=["health"])


@router.get(
    "/health",
    response_model=HealthResponse,
    summary="Health check endpoint",
    description="Returns the application status. Useful for deployment health probes.",
)
async def health_check() -> HealthResponse:
    logger.debug("Health check passed.")
    return HealthResponse(status="ok", version=__version__)


@router.get(
    "/health/version",
    response_model=VersionResponse,
    summary="Return application version and build information",
    description="Provides the current semantic version and build date of the running application.",
)
async def version() -> VersionResponse:
    """Return application version metadata."""
    return VersionResponse(version=__version__, build_date=_BUILD_DATE)
