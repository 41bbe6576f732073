"""Pydantic schemas."""
from app.schemas.params import CliConfig, ProtocolParams, Sweep
from app.schemas.records import (
    AnalysisRecord,
    EntanglementRecord,
    KeyRateRow,
    LedgerRecord,
    LogScalarRecord,
    ParityRow,
    SessionSummary,
)

__all__ = [
    "CliConfig",
    "ProtocolParams",
    "Sweep",
    "AnalysisRecord",
    "EntanglementRecord",
    "KeyRateRow",
    "LedgerRecord",
    "LogScalarRecord",
    "ParityRow",
    "SessionSummary",
]
