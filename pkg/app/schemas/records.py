"""Pydantic records emitted by the CLI and returned by the API."""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.services.coherent_math import AnalysisReport, LogScalar
from app.services.session import KeyRateRecord, SessionReport


class LogScalarRecord(BaseModel):
    """A log-space magnitude rendered for humans and kept lossless in ``ln``."""
    text: str = Field(..., description="Scientific notation, e.g. 1.94e-3657")
    mantissa: float
    exponent: int
    ln: Optional[float] = Field(None, description="Natural log; null for exact zero")

    @classmethod
    def from_scalar(cls, value: LogScalar) -> "LogScalarRecord":
        mantissa, exponent = value.mantissa_exponent()
        return cls(
            text=value.render(),
            mantissa=mantissa,
            exponent=exponent,
            ln=None if value.is_zero else value.ln_value,
        )


class AnalysisRecord(BaseModel):
    """Discrimination figures for one (mu, m)."""
    mu: float
    m: int
    p_usd: LogScalarRecord
    p_usd_exact: Optional[float] = None
    p_min: float = Field(..., ge=0, le=1)
    random_guess_error: float
    trace_distance_k0: LogScalarRecord
    delta_k0: LogScalarRecord
    secrecy_epsilon: Optional[LogScalarRecord] = Field(
        None, description="Only for m >= 100, where its truncation is valid"
    )

    @classmethod
    def from_report(cls, report: AnalysisReport) -> "AnalysisRecord":
        return cls(
            mu=report.mu,
            m=report.m,
            p_usd=LogScalarRecord.from_scalar(report.p_usd),
            p_usd_exact=report.p_usd_exact,
            p_min=report.p_min,
            random_guess_error=report.random_guess_error,
            trace_distance_k0=LogScalarRecord.from_scalar(report.trace_distance_k0),
            delta_k0=LogScalarRecord.from_scalar(report.delta_k0),
            secrecy_epsilon=(LogScalarRecord.from_scalar(report.secrecy_epsilon)
                             if report.secrecy_epsilon is not None else None),
        )

    def flat(self) -> Dict[str, Any]:
        """CSV row: log-space fields as text plus raw ln."""
        row: Dict[str, Any] = {"mu": self.mu, "m": self.m}
        for name in ("p_usd", "trace_distance_k0", "delta_k0", "secrecy_epsilon"):
            value = getattr(self, name)
            row[name] = value.text if value else ""
            row[f"{name}_ln"] = value.ln if value else ""
        row.update(p_usd_exact=self.p_usd_exact if self.p_usd_exact is not None else "",
                   p_min=self.p_min, random_guess_error=self.random_guess_error)
        return row


class KeyRateRow(BaseModel):
    """Analytic key-rate row; CSV columns are param, n, E, ell, R."""
    param: Optional[float] = None
    n: float
    E: float
    ell: int
    R: int

    @classmethod
    def from_record(cls, record: KeyRateRecord) -> "KeyRateRow":
        return cls(**record._asdict())


class LedgerRecord(BaseModel):
    """Pre-shared bits consumed and secret bits produced by one session."""
    consumed_mapping_otp: int
    consumed_k_upd: int
    consumed_verification: int
    consumed_pa_seed: int
    produced_ell: int
    net_R: int


class SessionSummary(BaseModel):
    """Counts and outcome of one simulated session, next to the analytic values."""
    n_alice: int
    n_bob: int
    n_matched: int
    E_emp: float
    lambda_: int = Field(..., alias="lambda")
    verification_passed: bool
    ell: int
    ledger: LedgerRecord
    transcript_digest: str
    detection_fraction: float
    detection_rate_analytic: float
    ber_analytic: float
    ber_event_weighted: float

    model_config = ConfigDict(populate_by_name=True)

    @classmethod
    def from_report(cls, report: SessionReport, N: int, analytic: Dict[str, float]) -> "SessionSummary":
        return cls(
            **report.summary(),
            detection_fraction=report.n_alice / N if N else 0.0,
            **analytic,
        )

    def flat(self) -> Dict[str, Any]:
        row = self.model_dump(by_alias=True, exclude={"ledger"})
        row.update(self.ledger.model_dump())
        return row


class ParityRow(BaseModel):
    """Reduced-state checks for one (k, delta_theta) branch."""
    k: int
    delta_theta: float
    x_parity: float
    expected_parity: int
    z_agreement: float


class EntanglementRecord(BaseModel):
    """Phase-error check over a grid of branches."""
    rows: List[ParityRow]
    max_phase_error: float
    mixture_phase_error: Optional[float] = None
    passed: bool
