"""Monte Carlo session endpoint."""
from fastapi import APIRouter
from pydantic import Field

from app.schemas.params import ProtocolParams
from app.schemas.records import SessionSummary
from app.services.reports import build_simulation
from app.settings import settings

router = APIRouter(prefix="/api", tags=["simulate"])


class SimulateRequest(ProtocolParams):
    """Seeded session; N is capped by API_MAX_ROUNDS."""
    N: int = Field(10**5, ge=0, description="Rounds per session")
    seed: int = Field(0, ge=0, description="Master seed")


@router.post("/simulate", response_model=SessionSummary, response_model_by_alias=True)
def simulate(request: SimulateRequest):
    """
    Run one full session and return its summary.

    The transcript stays server-side; its SHA-256 digest is returned.
    """
    summary, _ = build_simulation(request, request.seed, max_rounds=settings.API_MAX_ROUNDS)
    return summary
