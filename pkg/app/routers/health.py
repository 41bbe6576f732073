"""Health check endpoints."""
from fastapi import APIRouter

from app.settings import settings

router = APIRouter(tags=["health"])


@router.get("/health")
async def health():
    """
    Basic health check - process is alive.

    Returns 200 if the application is running.
    """
    return {"status": "healthy"}


@router.get("/ready")
async def ready():
    """Readiness check - reports the Monte Carlo limits in force."""
    return {
        "status": "ready",
        "env": settings.ENV,
        "api_max_rounds": settings.API_MAX_ROUNDS,
        "mc_workers": settings.MC_WORKERS,
    }
