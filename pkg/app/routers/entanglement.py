"""Zero phase-error check endpoint."""
import math
from typing import List, Optional

from fastapi import APIRouter
from pydantic import BaseModel, Field, field_validator

from app.schemas.records import EntanglementRecord
from app.services.reports import build_entanglement

router = APIRouter(prefix="/api", tags=["entanglement"])

MAX_PHOTON_NUMBER = 8


class EntangleCheckRequest(BaseModel):
    """Grid of photon numbers and phase differences."""
    k_list: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    delta_theta_list: List[float] = Field(
        default_factory=lambda: [0.0, 0.3, math.pi / 2, math.pi], min_length=1
    )
    mu: float = Field(0.1, ge=0)
    m: int = Field(1024, ge=1)
    k_max: Optional[int] = Field(None, ge=1, le=MAX_PHOTON_NUMBER)

    @field_validator("k_list")
    @classmethod
    def validate_k_list(cls, v: List[int]) -> List[int]:
        """Dense states are only built for small photon numbers."""
        if any(k < 0 or k > MAX_PHOTON_NUMBER for k in v):
            raise ValueError(f"k values must lie in 0..{MAX_PHOTON_NUMBER}")
        return v


@router.post("/entangle-check", response_model=EntanglementRecord)
def entangle_check(request: EntangleCheckRequest):
    """X-basis parity per branch and the worst phase error."""
    return build_entanglement(
        request.k_list, request.delta_theta_list, request.mu, request.m, request.k_max
    )
