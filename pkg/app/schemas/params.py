"""Protocol parameter schemas shared by the CLI and the API."""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.services.optics_sim import OpticsParams
from app.services.session import AccountingFlags, SessionConfig


class ProtocolParams(BaseModel):
    """Operating point; defaults reproduce the reference configuration."""
    model_config = ConfigDict(extra="forbid")

    mu: float = Field(0.1, ge=0, description="Mean photon number per pulse")
    m: int = Field(1024, ge=2, description="Number of global phases (power of two)")
    eta: float = Field(0.8, ge=0, le=1, description="Detector efficiency")
    pd: float = Field(1e-8, ge=0, lt=1, description="Dark-count probability per gate")
    f: float = Field(1.05, ge=1, description="Error-correction efficiency")
    eps_cor: float = Field(1e-15, gt=0, lt=1, description="Correctness failure probability")
    eps_sec: float = Field(1e-10, gt=0, lt=1, description="Secrecy failure probability")
    N: int = Field(10**9, ge=0, description="Rounds per session")
    s: int = Field(10**4, ge=1, description="Length of K_upd")
    t: Optional[int] = Field(None, ge=1, description="Negotiation output length (sized automatically)")
    count_verification_key: bool = False
    count_pa_seed: bool = False

    @field_validator("m")
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        """Phase substrings need log2(m) to be integral."""
        if v & (v - 1):
            raise ValueError(f"m must be a power of two, got {v}")
        return v

    def optics(self) -> OpticsParams:
        return OpticsParams(mu=self.mu, eta_d=self.eta, p_d=self.pd)

    def session_config(
        self,
        master_seed: int = 0,
        workers: Optional[int] = None,
        shard_rounds: Optional[int] = None,
    ) -> SessionConfig:
        return SessionConfig(
            N=self.N,
            m=self.m,
            optics=self.optics(),
            f=self.f,
            eps_cor=self.eps_cor,
            eps_sec=self.eps_sec,
            s=self.s,
            t=self.t,
            master_seed=master_seed,
            accounting_flags=AccountingFlags(
                count_verification_key=self.count_verification_key,
                count_pa_seed=self.count_pa_seed,
            ),
            workers=workers,
            shard_rounds=shard_rounds,
        )


SweepParam = Literal["mu", "m", "eta", "pd", "f", "eps_cor", "eps_sec", "N", "s"]


class Sweep(BaseModel):
    """One parameter stepped over a list of values."""
    param: SweepParam
    values: List[float] = Field(..., min_length=1)


class CliConfig(ProtocolParams):
    """Everything one CLI invocation needs."""
    command: Literal["analyze", "keyrate", "simulate", "entangle-check", "schema"]
    output_path: Optional[str] = None
    output_format: Literal["json", "csv"] = "json"
    seed: Optional[int] = Field(None, ge=0)
    sweep: Optional[Sweep] = None
    k_max: int = Field(4, ge=0, le=8)
    delta_theta: List[float] = Field(default_factory=lambda: [0.0, 0.3, math.pi / 2, math.pi])
    workers: Optional[int] = Field(None, ge=1)
