"""Coherent-state analysis endpoint."""
from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.schemas.records import AnalysisRecord
from app.services.reports import build_analysis

router = APIRouter(prefix="/api", tags=["analysis"])


class AnalyzeRequest(BaseModel):
    """Operating point to analyse."""
    mu: float = Field(0.1, ge=0, description="Mean photon number per pulse")
    m: int = Field(1024, ge=2, le=1 << 16, description="Number of global phases")


@router.post("/analyze", response_model=AnalysisRecord)
def analyze(request: AnalyzeRequest):
    """
    Discrimination figures an eavesdropper faces at (mu, m).

    Magnitudes below the double range come back as text plus natural log.
    """
    return build_analysis(request.mu, request.m)
