"""Analytic key-rate endpoint."""
from typing import List, Optional

from fastapi import APIRouter

from app.schemas.params import ProtocolParams, Sweep
from app.schemas.records import KeyRateRow
from app.services.reports import build_keyrate

router = APIRouter(prefix="/api", tags=["keyrate"])


class KeyRateRequest(ProtocolParams):
    """Operating point with an optional one-parameter sweep."""
    sweep: Optional[Sweep] = None


@router.post("/keyrate", response_model=List[KeyRateRow])
def keyrate(request: KeyRateRequest):
    """Expected n, E, ell and net rate R per session."""
    return build_keyrate(request, request.sweep)
