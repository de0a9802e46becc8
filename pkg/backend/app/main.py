"""FastAPI application factory for Sparse Market Lab.

Creates and configures the FastAPI application instance with CORS middleware,
request logging, domain-error mapping and router registration.

This is the entry point referenced by uvicorn (and by ``sparse-market serve``)::

    uvicorn app.main:app --host 0.0.0.0 --port 8000
"""

from __future__ import annotations

import logging
import time
from collections.abc import AsyncGenerator
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from app import __version__
from app.config import configure_logging, get_settings
from app.exceptions import SimulationError, TableWriteError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Lifespan: startup / shutdown
# ---------------------------------------------------------------------------


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncGenerator[None, None]:
    """Configure logging from settings on startup; log shutdown."""
    settings = get_settings()
    configure_logging(settings)
    logger.info(
        "Starting Sparse Market Lab (environment=%s, log_level=%s, workers=%d)",
        settings.ENVIRONMENT.value,
        settings.LOG_LEVEL.value,
        settings.effective_workers,
    )
    yield
    logger.info("Shutdown complete.")


def _first_error(exc: RequestValidationError | ValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return str(exc)
    first = errors[0]
    where = ".".join(str(part) for part in first.get("loc", ()) if part != "body")
    return f"{where}: {first.get('msg', 'invalid value')}" if where else str(first.get("msg"))


# ---------------------------------------------------------------------------
# Application factory
# ---------------------------------------------------------------------------


def create_app() -> FastAPI:
    """Create, configure, and return the FastAPI application instance."""
    settings = get_settings()

    application = FastAPI(
        title="Sparse Market Lab",
        description="Stable matching simulations for random markets with short preference lists.",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json",
        lifespan=lifespan,
    )

    # ------------------------------------------------------------------
    # CORS middleware
    # ------------------------------------------------------------------
    application.add_middleware(
        CORSMiddleware,
        allow_origins=settings.cors_origins_list,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # ------------------------------------------------------------------
    # Request logging middleware
    # ------------------------------------------------------------------
    @application.middleware("http")
    async def log_requests(request: Request, call_next) -> Response:  # type: ignore[no-untyped-def]
        """Log every incoming HTTP request with method, path, status, and duration."""
        start = time.monotonic()
        response: Response = await call_next(request)
        duration_ms = (time.monotonic() - start) * 1000.0
        logger.info(
            "%s %s - %d (%.1fms)",
            request.method,
            request.url.path,
            response.status_code,
            duration_ms,
        )
        return response

    # ------------------------------------------------------------------
    # Exception handlers
    # ------------------------------------------------------------------
    @application.exception_handler(RequestValidationError)
    async def request_validation_handler(
        request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        logger.info("Rejected %s %s: %s", request.method, request.url.path, _first_error(exc))
        return JSONResponse(status_code=422, content={"error": _first_error(exc)})

    @application.exception_handler(ValidationError)
    async def model_validation_handler(request: Request, exc: ValidationError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"error": _first_error(exc)})

    @application.exception_handler(SimulationError)
    async def domain_error_handler(request: Request, exc: SimulationError) -> JSONResponse:
        if isinstance(exc, TableWriteError):
            logger.exception("Storage failure on %s %s", request.method, request.url.path)
            return JSONResponse(status_code=500, content={"error": "Internal server error"})
        logger.info("Rejected %s %s: %s", request.method, request.url.path, exc)
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @application.exception_handler(Exception)
    async def unhandled_exception_handler(request: Request, exc: Exception) -> JSONResponse:
        """Catch any unhandled exceptions and return a generic 500 response.

        The full traceback is logged at ERROR level but never exposed to the
        client.
        """
        logger.exception("Unhandled exception on %s %s", request.method, request.url.path)
        return JSONResponse(
            status_code=500,
            content={"error": "Internal server error"},
        )

    # ------------------------------------------------------------------
    # Router registration
    # ------------------------------------------------------------------
    from app.routers.health import router as health_router
    from app.routers.simulations import router as simulations_router

    # Health routes are registered without the API prefix so that
    # deployment health probes can hit /health directly.
    application.include_router(health_router)
    application.include_router(simulations_router, prefix=settings.API_PREFIX)

    return application


# ---------------------------------------------------------------------------
# Module-level app instance used by uvicorn
# ---------------------------------------------------------------------------

app: FastAPI = create_app()
