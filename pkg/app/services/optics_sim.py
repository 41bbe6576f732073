"""Local single-photon interference measurement: analytic model and Monte Carlo.

Each party splits a phase-encoded weak pulse onto detectors L and R. With
signal phase phi the click probabilities are

    pL = 1 - (1 - p_d) exp(-mu eta_d (1 + cos phi))
    pR = 1 - (1 - p_d) exp(-mu eta_d (1 - cos phi))

and the two detectors click independently. A round succeeds iff exactly one
detector clicks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple

import numpy as np

from app.errors import DomainError
from app.services.coherent_math import bessel_i0
from app.services.mapping_rule import MappingRule
from app.settings import settings

logger = logging.getLogger(__name__)


class Detector(str, Enum):
    L = "L"
    R = "R"


@dataclass(frozen=True)
class OpticsParams:
    """
    Source and detector parameters of one party.

    Attributes:
        mu: Mean photon number per pulse
        eta_d: Detector efficiency in [0, 1]
        p_d: Dark-count probability per detector per gate, in [0, 1)
    """
    mu: float = 0.1
    eta_d: float = 0.8
    p_d: float = 1e-8

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu < 0:
            raise DomainError(f"mu must be a finite nonnegative intensity, got {self.mu}")
        if not 0 <= self.eta_d <= 1:
            raise DomainError(f"eta_d must lie in [0, 1], got {self.eta_d}")
        if not 0 <= self.p_d < 1:
            raise DomainError(f"p_d must lie in [0, 1), got {self.p_d}")

    @property
    def mu_eta(self) -> float:
        return self.mu * self.eta_d


@dataclass(frozen=True)
class DetectionEvent:
    """One successful round: exactly one detector clicked."""
    round: int
    phase_index: int
    key_bit: int
    detector: Detector


@dataclass(frozen=True, eq=False)
class EventBatch:
    """
    Column store of one party's successful events, in round order.

    ``substring`` holds the MSB-first value of the party's random phase
    substring; ``phase_index`` is that substring looked up in the rule.
    ``detector`` uses 0 for L and 1 for R.
    """
    rounds: np.ndarray
    substring: np.ndarray
    phase_index: np.ndarray
    key_bit: np.ndarray
    detector: np.ndarray
    total_rounds: int

    def __len__(self) -> int:
        return int(self.rounds.size)

    def events(self) -> Iterator[DetectionEvent]:
        for rnd, j, r, d in zip(self.rounds, self.phase_index, self.key_bit, self.detector):
            yield DetectionEvent(
                round=int(rnd), phase_index=int(j), key_bit=int(r),
                detector=Detector.R if d else Detector.L,
            )

    @classmethod
    def empty(cls, total_rounds: int = 0) -> "EventBatch":
        none = np.zeros(0, dtype=np.int64)
        return cls(none, none, none, none.astype(np.uint8), none.astype(np.uint8), total_rounds)

    @classmethod
    def concat(cls, batches: List["EventBatch"], total_rounds: int) -> "EventBatch":
        if not batches:
            return cls.empty(total_rounds)
        return cls(
            rounds=np.concatenate([b.rounds for b in batches]),
            substring=np.concatenate([b.substring for b in batches]),
            phase_index=np.concatenate([b.phase_index for b in batches]),
            key_bit=np.concatenate([b.key_bit for b in batches]),
            detector=np.concatenate([b.detector for b in batches]),
            total_rounds=total_rounds,
        )


# =============================================================================
# ANALYTIC MODEL
# =============================================================================

def click_probs(p: OpticsParams, phi):
    """Marginal click probabilities (pL, pR); ``phi`` may be an array."""
    cos_phi = np.cos(phi)
    survive = 1.0 - p.p_d
    p_left = 1.0 - survive * np.exp(-p.mu_eta * (1.0 + cos_phi))
    p_right = 1.0 - survive * np.exp(-p.mu_eta * (1.0 - cos_phi))
    if np.ndim(phi) == 0:
        return float(p_left), float(p_right)
    return p_left, p_right


def gains(p: OpticsParams, phi):
    """(Q_L, Q_R): probability that only L, respectively only R, clicks."""
    p_left, p_right = click_probs(p, phi)
    return p_left * (1.0 - p_right), p_right * (1.0 - p_left)


def detection_rate(p: OpticsParams) -> float:
    """Phase-averaged probability of a successful round (closed form)."""
    x = p.mu_eta
    survive = 1.0 - p.p_d
    return 2.0 * (survive * math.exp(-x) * bessel_i0(x) - survive**2 * math.exp(-2 * x))


def detection_rate_discrete(p: OpticsParams, m: int) -> float:
    """Success probability averaged over the m discrete global phases."""
    if m < 1:
        raise DomainError(f"m must be a positive phase count, got {m}")
    q_left, q_right = gains(p, 2 * np.pi * np.arange(m) / m)
    return float(np.mean(q_left + q_right))


def _grid(nodes: Optional[int]) -> np.ndarray:
    nodes = nodes or settings.QUADRATURE_NODES
    return 2 * np.pi * np.arange(nodes) / nodes


def _mismatch_terms(p: OpticsParams, nodes: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    q_left, q_right = gains(p, _grid(nodes))
    total = q_left + q_right
    mismatch = np.zeros_like(total)
    live = total > 0
    mismatch[live] = 2 * q_left[live] * q_right[live] / total[live]
    return total, mismatch


def ber_analytic(p: OpticsParams, nodes: Optional[int] = None) -> float:
    """
    Phase-averaged bit error rate (1/2pi) int 2 Q_L Q_R / (Q_L + Q_R)^2.

    Trapezoid rule on a uniform periodic grid; phases without any events
    contribute zero.
    """
    total, mismatch = _mismatch_terms(p, nodes)
    ratio = np.zeros_like(total)
    live = total > 0
    ratio[live] = mismatch[live] / total[live]
    return float(np.mean(ratio))


def ber_event_weighted(p: OpticsParams, nodes: Optional[int] = None) -> float:
    """
    Bit error rate weighted by the event rate at each phase.

    Paired events are drawn in proportion to Q_L + Q_R, so this is what an
    empirical session error rate converges to.
    """
    total, mismatch = _mismatch_terms(p, nodes)
    denominator = float(np.sum(total))
    if denominator == 0:
        return 0.0
    return float(np.sum(mismatch)) / denominator


# =============================================================================
# MONTE CARLO
# =============================================================================

def _signal_phase(phase_index, m: int, key_bit):
    return 2 * np.pi * np.asarray(phase_index) / m + np.pi * np.asarray(key_bit)


def simulate_round(
    rng: np.random.Generator,
    p: OpticsParams,
    phase_index: int,
    m: int,
    key_bit: int,
    round_index: int = 0,
) -> Optional[DetectionEvent]:
    """One interference round; None on no click or a double click."""
    p_left, p_right = click_probs(p, float(_signal_phase(phase_index, m, key_bit)))
    u_left, u_right = rng.random(2)
    left, right = u_left < p_left, u_right < p_right
    if left == right:
        return None
    return DetectionEvent(
        round=round_index,
        phase_index=phase_index,
        key_bit=key_bit,
        detector=Detector.L if left else Detector.R,
    )


def simulate_rounds(
    rng: np.random.Generator,
    p: OpticsParams,
    phase_indices: np.ndarray,
    m: int,
    key_bits: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized ``simulate_round``.

    Draws the same (L, R) uniforms per round in the same order, so the
    result matches a loop of simulate_round calls on an equal generator.

    Returns:
        (success mask, detector array with 0 for L and 1 for R)
    """
    p_left, p_right = click_probs(p, _signal_phase(phase_indices, m, key_bits))
    draws = rng.random((len(phase_indices), 2))
    left = draws[:, 0] < p_left
    right = draws[:, 1] < p_right
    return left ^ right, right.astype(np.uint8)


def shard_generator(master_seed: int, party: int, shard: int) -> np.random.Generator:
    """Generator for one (party, shard) stream of a session."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(party, shard)))


def _simulate_shard(
    master_seed: int,
    party: int,
    shard: int,
    start: int,
    stop: int,
    p: OpticsParams,
    rule: MappingRule,
) -> EventBatch:
    rng = shard_generator(master_seed, party, shard)
    count = stop - start
    width = rule.width
    substring_bits = rng.integers(0, 2, size=(count, width), dtype=np.int64)
    substring = substring_bits @ (1 << np.arange(width - 1, -1, -1, dtype=np.int64))
    key_bit = rng.integers(0, 2, size=count, dtype=np.int64)
    phase_index = rule.inverse[substring]

    success, detector = simulate_rounds(rng, p, phase_index, rule.m, key_bit)
    hits = np.flatnonzero(success)
    return EventBatch(
        rounds=hits.astype(np.int64) + start,
        substring=substring[hits],
        phase_index=phase_index[hits],
        key_bit=key_bit[hits].astype(np.uint8),
        detector=detector[hits],
        total_rounds=count,
    )


def simulate_party(
    master_seed: int,
    party: int,
    p: OpticsParams,
    rule: MappingRule,
    N: int,
    shard_rounds: Optional[int] = None,
    workers: Optional[int] = None,
) -> EventBatch:
    """
    Simulate N rounds for one party and keep the successful events.

    Rounds are cut into fixed-size shards, each with its own generator
    derived from (master_seed, party, shard), so the merged events do not
    depend on how many workers ran the shards.
    """
    if N < 0:
        raise DomainError(f"round count must be nonnegative, got {N}")
    shard_rounds = shard_rounds or settings.MC_SHARD_ROUNDS
    workers = workers or settings.MC_WORKERS

    bounds = [(shard, start, min(start + shard_rounds, N))
              for shard, start in enumerate(range(0, N, shard_rounds))]

    if workers == 1 or len(bounds) <= 1:
        batches = [_simulate_shard(master_seed, party, *b, p, rule) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda b: _simulate_shard(master_seed, party, *b, p, rule), bounds))

    events = EventBatch.concat(batches, total_rounds=N)
    logger.info(
        "Party rounds simulated",
        extra={'extra_fields': {
            'party': party, 'rounds': N, 'events': len(events),
            'shards': len(bounds), 'workers': workers,
        }}
    )
    return events
