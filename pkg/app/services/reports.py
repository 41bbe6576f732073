"""Record builders behind the CLI commands and the API routes."""
import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Tuple

from app.errors import DomainError
from app.schemas.params import ProtocolParams, Sweep
from app.schemas.records import (
    AnalysisRecord,
    EntanglementRecord,
    KeyRateRow,
    ParityRow,
    SessionSummary,
)
from app.services.coherent_math import analysis_report
from app.services.entanglement_check import (
    build_rho_k_state,
    mixture_phase_error_rate,
    phase_error_rate,
    x_basis_parity,
    z_basis_agreement,
)
from app.services.optics_sim import ber_analytic, ber_event_weighted, detection_rate
from app.services.session import analytic_keyrate, run_session
from app.settings import settings

logger = logging.getLogger(__name__)

PARITY_TOLERANCE = 1e-10
_INTEGER_PARAMS = {"m", "N", "s"}


def build_analysis(mu: float, m: int) -> AnalysisRecord:
    return AnalysisRecord.from_report(analysis_report(mu, m))


def build_keyrate(params: ProtocolParams, sweep: Optional[Sweep] = None) -> List[KeyRateRow]:
    """One row at the operating point, or one per sweep value."""
    if sweep is None:
        return [KeyRateRow.from_record(analytic_keyrate(params.session_config()))]

    base = params.model_dump(include=set(ProtocolParams.model_fields))
    rows = []
    for value in sweep.values:
        cast = int(value) if sweep.param in _INTEGER_PARAMS else value
        point = ProtocolParams.model_validate({**base, sweep.param: cast})
        rows.append(KeyRateRow.from_record(analytic_keyrate(point.session_config(), param=value)))
    logger.info(
        "Key-rate sweep computed",
        extra={'extra_fields': {'param': sweep.param, 'points': len(rows)}}
    )
    return rows


def build_simulation(
    params: ProtocolParams,
    seed: int,
    workers: Optional[int] = None,
    max_rounds: Optional[int] = None,
) -> Tuple[SessionSummary, Dict[str, Any]]:
    """
    Run one seeded session and pair its summary with the analytic values.

    Raises:
        DomainError: If N exceeds the desk-scale Monte Carlo cap
    """
    cap = max_rounds or settings.MC_MAX_ROUNDS
    if params.N > cap:
        raise DomainError(
            f"--N {params.N} exceeds the Monte Carlo cap of {cap} rounds; "
            "use the keyrate command for larger sessions"
        )
    cfg = params.session_config(master_seed=seed, workers=workers)
    report = run_session(cfg)
    optics = cfg.optics
    summary = SessionSummary.from_report(report, cfg.N, {
        "detection_rate_analytic": detection_rate(optics),
        "ber_analytic": ber_analytic(optics),
        "ber_event_weighted": ber_event_weighted(optics),
    })
    return summary, report.transcript


def build_entanglement(
    k_list: Iterable[int],
    delta_theta_list: Iterable[float],
    mu: float = 0.1,
    m: int = 1024,
    k_max: Optional[int] = None,
) -> EntanglementRecord:
    """Parity grid, worst branch phase error and (for even m) the mixture error."""
    ks = list(k_list)
    thetas = list(delta_theta_list)
    rows = []
    for k in ks:
        for theta in thetas:
            state = build_rho_k_state(k, theta)
            rows.append(ParityRow(
                k=k,
                delta_theta=theta,
                x_parity=x_basis_parity(state),
                expected_parity=(-1) ** k,
                z_agreement=z_basis_agreement(state),
            ))
    worst = phase_error_rate(ks, thetas)
    mixture = None
    if m % 2 == 0:
        mixture = mixture_phase_error_rate(mu, m, min(k_max or max(ks) + 1, m), thetas)

    passed = worst <= PARITY_TOLERANCE and all(
        math.isclose(row.x_parity, row.expected_parity, abs_tol=PARITY_TOLERANCE) for row in rows
    )
    return EntanglementRecord(
        rows=rows,
        max_phase_error=worst,
        mixture_phase_error=mixture,
        passed=passed,
    )
