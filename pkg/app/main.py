"""FastAPI application entrypoint."""
from contextlib import asynccontextmanager
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from app.errors import PKDError
from app.routers import analysis, entanglement, health, keyrate, simulate
from app.settings import settings
from app.startup import run_startup_validation
from app.middleware import RequestLoggingMiddleware, setup_logging

# Configure logging before anything else
setup_logging()
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan with startup validation.

    Fails fast with clear error messages if configuration is invalid.
    """
    logger.info(f"Starting application in {settings.ENV} environment")

    try:
        run_startup_validation()
    except Exception as e:
        logger.error(f"Startup validation failed: {e}")
        logger.error("Application will not start")
        raise

    yield

    logger.info("Shutting down application")


app = FastAPI(
    title="PKD Lab",
    description="Probability key distribution: analysis, key rates, sessions and phase-error checks",
    version="0.1.0",
    lifespan=lifespan
)

app.add_middleware(RequestLoggingMiddleware)


# =============================================================================
# EXCEPTION HANDLERS
# =============================================================================

@app.exception_handler(PKDError)
async def pkd_error_handler(request: Request, exc: PKDError):
    """Protocol and numerics errors become JSON with a stable error code."""
    logger.warning(
        f"Request rejected: {exc.code}",
        extra={'extra_fields': {'path': request.url.path, 'error': exc.code}}
    )
    return JSONResponse(
        status_code=exc.http_status,
        content={"error": exc.code, "detail": exc.message},
    )


@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc: ValidationError):
    """Parameters that fail validation after request parsing (sweep points)."""
    return JSONResponse(
        status_code=422,
        content={"error": "validation_error", "detail": str(exc)},
    )


# Include routers
app.include_router(health.router)
app.include_router(analysis.router)
app.include_router(keyrate.router)
app.include_router(simulate.router)
app.include_router(entanglement.router)
