"""One PKD session, steps (i) to (v), with a ledger of pre-shared key use.

(i)   Alice builds a random mapping rule and ships it under a one-time pad.
(ii)  Both parties prepare random phases and key bits and measure locally;
      successful rounds and their detectors are announced.
(iii) Alice's phase substrings are sent encrypted with D = K_upd . H_st; Bob
      pairs events by phase, then flips his bit where the detectors differ.
(iv)  Error correction (disclosure accounting) and a Toeplitz MAC check.
(v)   Privacy amplification down to the secure length.
"""
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, NamedTuple, Optional, Tuple

import numpy as np

from app.errors import DomainError, InsufficientKeyPool, LengthMismatch, NegotiationOverflow
from app.services.bits import BitString
from app.services.coherent_math import binary_entropy
from app.services.mapping_rule import (
    block_width,
    generate_rule_from_rng,
    otp_decrypt_rule,
    otp_encrypt_rule,
    rule_key_cost,
)
from app.services.optics_sim import (
    EventBatch,
    OpticsParams,
    ber_analytic,
    detection_rate,
    simulate_party,
)
from app.services.toeplitz import ToeplitzSeed, compress, mac_tag, toeplitz_product

logger = logging.getLogger(__name__)

ALICE, BOB = 0, 1
# spawn-key roots of the non-party streams
RULE_STREAM, KFIX_STREAM, POOL_STREAM, PUBLIC_STREAM = 2, 3, 4, 5

T_SIZING_FACTOR = 1.05
T_SIGMA_MARGIN = 5.0


# =============================================================================
# CONFIG
# =============================================================================

def tag_length(eps_cor: float) -> int:
    """Verification tag bits ceil(log2(2 / eps_cor))."""
    if not 0 < eps_cor < 1:
        raise DomainError(f"eps_cor must lie in (0, 1), got {eps_cor}")
    return math.ceil(math.log2(2 / eps_cor))


def sizing_t(N: int, p: OpticsParams, m: int) -> int:
    """
    Default negotiation length t.

    ceil(1.05 E[n]) phase substrings, raised if needed so that t covers the
    expected event count plus five standard deviations.
    """
    rate = detection_rate(p)
    mean = N * rate
    sigma = math.sqrt(N * rate * (1 - rate))
    events = max(math.ceil(T_SIZING_FACTOR * mean), math.ceil(mean + T_SIGMA_MARGIN * sigma))
    return max(1, events * block_width(m))


@dataclass(frozen=True)
class AccountingFlags:
    """Optional deductions from the net rate; both off reproduces R = l - s - m log2 m."""
    count_verification_key: bool = False
    count_pa_seed: bool = False


@dataclass(frozen=True)
class SessionConfig:
    """
    Parameters of one session.

    ``t`` defaults to ``sizing_t``; ``key_pool_bits`` defaults to the rule
    OTP plus K_upd plus two verification tags.
    """
    N: int = 10**6
    m: int = 1024
    optics: OpticsParams = field(default_factory=OpticsParams)
    f: float = 1.05
    eps_cor: float = 1e-15
    eps_sec: float = 1e-10
    s: int = 10**4
    t: Optional[int] = None
    master_seed: int = 0
    accounting_flags: AccountingFlags = field(default_factory=AccountingFlags)
    key_pool_bits: Optional[int] = None
    shard_rounds: Optional[int] = None
    workers: Optional[int] = None

    def __post_init__(self):
        block_width(self.m)
        if self.N < 0:
            raise DomainError(f"N must be nonnegative, got {self.N}")
        if self.f < 1:
            raise DomainError(f"error-correction efficiency f must be >= 1, got {self.f}")
        if not 0 < self.eps_sec < 1:
            raise DomainError(f"eps_sec must lie in (0, 1), got {self.eps_sec}")
        tag_length(self.eps_cor)
        if self.s < 1:
            raise DomainError(f"K_upd length s must be positive, got {self.s}")
        if self.master_seed < 0:
            raise DomainError(f"master_seed must be nonnegative, got {self.master_seed}")

        if self.t is None:
            object.__setattr__(self, "t", sizing_t(self.N, self.optics, self.m))
        else:
            rate = detection_rate(self.optics)
            mean = self.N * rate
            needed = (mean + T_SIGMA_MARGIN * math.sqrt(self.N * rate * (1 - rate))) * block_width(self.m)
            if self.t < 1 or self.t < needed:
                raise DomainError(
                    f"t={self.t} is below the expected negotiation size plus 5 sigma ({needed:.0f} bits)"
                )

        if self.key_pool_bits is None:
            bits = self.upfront_key_bits + self.tag_bits
            if self.accounting_flags.count_pa_seed:
                # PA seed is ell + n - 1 <= 2N bits
                bits += 2 * self.N
            object.__setattr__(self, "key_pool_bits", bits)

    @property
    def tag_bits(self) -> int:
        return tag_length(self.eps_cor)

    @property
    def upfront_key_bits(self) -> int:
        """Pool bits a session needs before step (i) may start."""
        return rule_key_cost(self.m).bits + self.s + self.tag_bits

    @property
    def optics_dict(self) -> Dict[str, float]:
        return asdict(self.optics)


# =============================================================================
# KEY POOL AND LEDGER
# =============================================================================

class KeyPool:
    """
    Modeled pre-shared secret key held identically by Alice and Bob.

    Bits come from a seeded generator; ``draw`` consumes them in order.
    """

    def __init__(self, bits: int, rng: np.random.Generator):
        self.capacity = bits
        self.consumed = 0
        self._rng = rng

    @property
    def remaining(self) -> int:
        return self.capacity - self.consumed

    def require(self, bits: int) -> None:
        if bits > self.remaining:
            raise InsufficientKeyPool(requested=bits, available=self.remaining)

    def draw(self, bits: int) -> BitString:
        self.require(bits)
        self.consumed += bits
        return BitString.random(self._rng, bits)


@dataclass(frozen=True)
class KeyLedger:
    """Pre-shared bits consumed per purpose against secret bits produced."""
    consumed_mapping_otp: int = 0
    consumed_k_upd: int = 0
    consumed_verification: int = 0
    consumed_pa_seed: int = 0
    produced_ell: int = 0
    net_R: int = 0

    @property
    def total_consumed(self) -> int:
        return (self.consumed_mapping_otp + self.consumed_k_upd
                + self.consumed_verification + self.consumed_pa_seed)


@dataclass(frozen=True)
class SessionReport:
    """Outcome of one session; final keys are kept out of the transcript."""
    n_alice: int
    n_bob: int
    n_matched: int
    E_emp: float
    lambda_: int
    verification_passed: bool
    ell: int
    ledger: KeyLedger
    transcript_digest: str
    transcript: Dict[str, Any] = field(repr=False, compare=False)
    key_alice: BitString = field(repr=False)
    key_bob: BitString = field(repr=False)

    def summary(self) -> Dict[str, Any]:
        return {
            "n_alice": self.n_alice,
            "n_bob": self.n_bob,
            "n_matched": self.n_matched,
            "E_emp": self.E_emp,
            "lambda": self.lambda_,
            "verification_passed": self.verification_passed,
            "ell": self.ell,
            "ledger": asdict(self.ledger),
            "transcript_digest": self.transcript_digest,
        }


class MatchedPairs(NamedTuple):
    """Paired events, aligned index by index; ``alice``/``bob`` index the batches."""
    alice: np.ndarray
    bob: np.ndarray
    phase_index: np.ndarray
    key_bit_a: np.ndarray
    key_bit_b: np.ndarray
    detector_a: np.ndarray
    detector_b: np.ndarray

    def __len__(self) -> int:
        return int(self.alice.size)


class KeyRateRecord(NamedTuple):
    """Analytic key rate for one operating point."""
    param: Optional[float]
    n: float
    E: float
    ell: int
    R: int


# =============================================================================
# STEP (iii): NEGOTIATION AND SIFTING
# =============================================================================

def negotiate_phases(seed: ToeplitzSeed, k_upd: BitString, phase_bits: BitString) -> BitString:
    """Encrypt phase bits with the prefix of D = K_upd . H_st."""
    if len(phase_bits) > seed.cols:
        raise NegotiationOverflow(needed=len(phase_bits), t=seed.cols)
    pad = toeplitz_product(seed, k_upd)
    return phase_bits ^ pad[:len(phase_bits)]


def decrypt_phases(seed: ToeplitzSeed, k_upd: BitString, ciphertext: BitString) -> BitString:
    """Receiving side of ``negotiate_phases``."""
    if len(ciphertext) > seed.cols:
        raise NegotiationOverflow(needed=len(ciphertext), t=seed.cols)
    pad = toeplitz_product(seed, k_upd)
    return ciphertext ^ pad[:len(ciphertext)]


def _bucket_ranks(phases: np.ndarray) -> np.ndarray:
    """Arrival rank of each event within its phase bucket."""
    order = np.argsort(phases, kind="stable")
    ordered = phases[order]
    starts = np.flatnonzero(np.r_[True, ordered[1:] != ordered[:-1]])
    run_lengths = np.diff(np.r_[starts, ordered.size])
    ranks_sorted = np.arange(ordered.size) - np.repeat(starts, run_lengths)
    ranks = np.empty_like(ranks_sorted)
    ranks[order] = ranks_sorted
    return ranks


def pair_events(alice: EventBatch, bob: EventBatch) -> MatchedPairs:
    """
    Pair events phase bucket by phase bucket in arrival order.

    Bucket j yields min(count_a(j), count_b(j)) pairs; the rest are dropped.
    Output follows Alice's arrival order.
    """
    if not len(alice) or not len(bob):
        empty = np.zeros(0, dtype=np.int64)
        return MatchedPairs(empty, empty, empty, empty, empty, empty, empty)

    stride = max(len(alice), len(bob)) + 1
    key_a = alice.phase_index.astype(np.int64) * stride + _bucket_ranks(alice.phase_index)
    key_b = bob.phase_index.astype(np.int64) * stride + _bucket_ranks(bob.phase_index)

    order_b = np.argsort(key_b)
    sorted_b = key_b[order_b]
    pos = np.clip(np.searchsorted(sorted_b, key_a), 0, sorted_b.size - 1)
    hit = sorted_b[pos] == key_a

    ia = np.flatnonzero(hit)
    ib = order_b[pos[hit]]
    return MatchedPairs(
        alice=ia,
        bob=ib,
        phase_index=alice.phase_index[ia],
        key_bit_a=alice.key_bit[ia],
        key_bit_b=bob.key_bit[ib],
        detector_a=alice.detector[ia],
        detector_b=bob.detector[ib],
    )


def sift_and_flip(pairs: MatchedPairs) -> Tuple[BitString, BitString]:
    """Raw keys; Bob's bit flips where the two detectors differ."""
    z_a = BitString(pairs.key_bit_a)
    z_b = BitString(pairs.key_bit_b ^ (pairs.detector_a != pairs.detector_b).astype(np.uint8))
    return z_a, z_b


# =============================================================================
# STEPS (iv) AND (v)
# =============================================================================

def error_rate(z_a: BitString, z_b: BitString) -> float:
    if len(z_a) != len(z_b):
        raise LengthMismatch(f"raw keys differ in length: {len(z_a)} vs {len(z_b)}")
    if not len(z_a):
        return 0.0
    return (z_a ^ z_b).count_ones() / len(z_a)


def error_correct(z_a: BitString, z_b: BitString, f: float) -> Tuple[BitString, int]:
    """
    Disclosure model: Bob ends with Alice's string and lambda bits leak.

    lambda = ceil(n f h(E_emp)).
    """
    e_emp = error_rate(z_a, z_b)
    leaked = math.ceil(len(z_a) * f * binary_entropy(e_emp))
    return BitString(z_a.bits), leaked


def verification_tags(
    z_a: BitString,
    z_b: BitString,
    eps_cor: float,
    key_pool: KeyPool,
    rng: np.random.Generator,
) -> Tuple[BitString, BitString]:
    """
    Both parties' MAC tags over their corrected keys.

    The hash seed is public randomness; the tag OTP comes from the pool.
    """
    if len(z_a) != len(z_b):
        raise LengthMismatch(f"corrected keys differ in length: {len(z_a)} vs {len(z_b)}")
    bits = tag_length(eps_cor)
    otp = key_pool.draw(bits)
    seed = ToeplitzSeed.random(rng, rows=bits, cols=len(z_a))
    return mac_tag(seed, otp, z_a), mac_tag(seed, otp, z_b)


def verify_keys(
    z_a: BitString,
    z_b: BitString,
    eps_cor: float,
    key_pool: KeyPool,
    rng: Optional[np.random.Generator] = None,
) -> bool:
    """True when both sides compute the same tag."""
    tag_a, tag_b = verification_tags(z_a, z_b, eps_cor, key_pool, rng or np.random.default_rng())
    return tag_a == tag_b


def key_length(n: float, E_emp: float, f: float, eps_cor: float, eps_sec: float) -> int:
    """
    Secure key length with zero phase error.

    l = max(0, floor(n - n f h(E) - log2(2/eps_cor) - 2 log2(3/(2 eps_sec)))).
    """
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if n == 0:
        return 0
    ell = n - n * f * binary_entropy(E_emp) - math.log2(2 / eps_cor) - 2 * math.log2(3 / (2 * eps_sec))
    return max(0, math.floor(ell))


def privacy_amplify(z: BitString, ell: int, pa_seed: BitString) -> BitString:
    """Toeplitz-hash ``z`` down to ``ell`` bits."""
    if ell > len(z):
        raise LengthMismatch(f"cannot extract {ell} bits from {len(z)}")
    if ell == 0:
        return BitString.zeros(0)
    return compress(ToeplitzSeed(bits=pa_seed, rows=ell, cols=len(z)), z)


def net_rate(cfg: SessionConfig, ell: int, verification_bits: int = 0, pa_seed_bits: int = 0) -> int:
    """R = l - s - m log2 m, minus flagged verification and PA-seed bits."""
    rate = ell - cfg.s - rule_key_cost(cfg.m).bits
    if cfg.accounting_flags.count_verification_key:
        rate -= verification_bits
    if cfg.accounting_flags.count_pa_seed:
        rate -= pa_seed_bits
    return rate


def analytic_keyrate(
    cfg: SessionConfig,
    ber: Optional[float] = None,
    param: Optional[float] = None,
) -> KeyRateRecord:
    """
    Expected-value pipeline: n = N * detection_rate, E = ber_analytic.

    ``ber`` overrides the analytic error rate.
    """
    if cfg.N == 0:
        return KeyRateRecord(param=param, n=0.0, E=0.0, ell=0, R=0)
    n = cfg.N * detection_rate(cfg.optics)
    error = ber_analytic(cfg.optics) if ber is None else ber
    ell = key_length(n, error, cfg.f, cfg.eps_cor, cfg.eps_sec)
    pa_seed_bits = ell + math.floor(n) - 1 if ell else 0
    rate = net_rate(cfg, ell, cfg.tag_bits, pa_seed_bits)
    return KeyRateRecord(param=param, n=n, E=error, ell=ell, R=rate)


# =============================================================================
# TRANSCRIPT
# =============================================================================

def _announced(batch: EventBatch) -> list:
    return [{"round": int(r), "detector": "R" if d else "L"}
            for r, d in zip(batch.rounds, batch.detector)]


def build_transcript(
    summary: Dict[str, Any],
    cfg: SessionConfig,
    public: Dict[str, Any],
) -> Tuple[Dict[str, Any], str]:
    """
    Public record of a session and its SHA-256 digest.

    ``public`` holds the announced messages; raw phase bits and keys never
    enter it.
    """
    document = {
        "config": {
            "N": cfg.N,
            "m": cfg.m,
            "optics": cfg.optics_dict,
            "f": cfg.f,
            "eps_cor": cfg.eps_cor,
            "eps_sec": cfg.eps_sec,
            "s": cfg.s,
            "t": cfg.t,
            "master_seed": cfg.master_seed,
            "accounting_flags": asdict(cfg.accounting_flags),
            "key_pool_bits": cfg.key_pool_bits,
        },
        **public,
        **summary,
    }
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return document, hashlib.sha256(canonical.encode()).hexdigest()


# =============================================================================
# SESSION
# =============================================================================

def _stream(cfg: SessionConfig, root: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(root,)))


def run_session(cfg: SessionConfig) -> SessionReport:
    """
    Execute steps (i)-(v) and return the report.

    Deterministic in ``cfg`` (including master_seed) for any worker count.

    Raises:
        InsufficientKeyPool: Before step (i), when the pool cannot cover it
        NegotiationOverflow: When Alice's phase bits exceed t
    """
    pool = KeyPool(cfg.key_pool_bits, _stream(cfg, POOL_STREAM))
    pool.require(cfg.upfront_key_bits)
    public_rng = _stream(cfg, PUBLIC_STREAM)
    width = block_width(cfg.m)

    # (i) mapping rule under OTP
    rule_a = generate_rule_from_rng(_stream(cfg, RULE_STREAM), cfg.m)
    rule_otp = pool.draw(rule_key_cost(cfg.m).bits)
    rule_ct = otp_encrypt_rule(rule_a, rule_otp)
    rule_b = otp_decrypt_rule(rule_ct, rule_otp, cfg.m)
    logger.info("Step i: mapping rule shared", extra={'extra_fields': {
        'm': cfg.m, 'otp_bits': len(rule_otp)}})

    # (ii) preparation and local measurement
    alice = simulate_party(cfg.master_seed, ALICE, cfg.optics, rule_a, cfg.N,
                           cfg.shard_rounds, cfg.workers)
    bob = simulate_party(cfg.master_seed, BOB, cfg.optics, rule_b, cfg.N,
                         cfg.shard_rounds, cfg.workers)
    logger.info("Step ii: events announced", extra={'extra_fields': {
        'rounds': cfg.N, 'n_alice': len(alice), 'n_bob': len(bob)}})

    # (iii) negotiation, pairing and flips
    phase_bits = BitString.from_blocks(alice.substring, width)
    if len(phase_bits) > cfg.t:
        raise NegotiationOverflow(needed=len(phase_bits), t=cfg.t)
    k_fix = ToeplitzSeed.random(_stream(cfg, KFIX_STREAM), rows=cfg.s, cols=cfg.t)
    k_upd = pool.draw(cfg.s)
    ciphertext = negotiate_phases(k_fix, k_upd, phase_bits)
    received = decrypt_phases(k_fix, k_upd, ciphertext)
    received_substrings = received.blocks(width)
    alice_seen_by_bob = EventBatch(
        rounds=alice.rounds,
        substring=received_substrings,
        phase_index=rule_b.inverse[received_substrings],
        key_bit=alice.key_bit,
        detector=alice.detector,
        total_rounds=alice.total_rounds,
    )
    pairs = pair_events(alice_seen_by_bob, bob)
    z_a, z_b = sift_and_flip(pairs)
    e_emp = error_rate(z_a, z_b)
    logger.info("Step iii: phases negotiated and events paired", extra={'extra_fields': {
        'ciphertext_bits': len(ciphertext), 't': cfg.t, 'n_matched': len(pairs),
        'E_emp': round(e_emp, 6)}})

    # (iv) error correction and verification
    z_b_corrected, leaked = error_correct(z_a, z_b, cfg.f)
    n = len(z_a)
    tag_hex = ""
    verified = True
    consumed_verification = 0
    if n:
        before = pool.consumed
        tag_a, tag_b = verification_tags(z_a, z_b_corrected, cfg.eps_cor, pool, public_rng)
        consumed_verification = pool.consumed - before
        verified = tag_a == tag_b
        tag_hex = tag_a.hex()
    logger.info("Step iv: keys reconciled", extra={'extra_fields': {
        'lambda': leaked, 'tag_bits': consumed_verification, 'verification_passed': verified}})

    # (v) privacy amplification
    ell = key_length(n, e_emp, cfg.f, cfg.eps_cor, cfg.eps_sec) if verified else 0
    consumed_pa = 0
    if ell:
        seed_bits = ell + n - 1
        if cfg.accounting_flags.count_pa_seed:
            pa_seed = pool.draw(seed_bits)
            consumed_pa = seed_bits
        else:
            pa_seed = BitString.random(public_rng, seed_bits)
        key_alice = privacy_amplify(z_a, ell, pa_seed)
        key_bob = privacy_amplify(z_b_corrected, ell, pa_seed)
    else:
        key_alice = key_bob = BitString.zeros(0)

    ledger = KeyLedger(
        consumed_mapping_otp=len(rule_otp),
        consumed_k_upd=len(k_upd),
        consumed_verification=consumed_verification,
        consumed_pa_seed=consumed_pa,
        produced_ell=ell,
    )
    rate = net_rate(cfg, ell, consumed_verification, consumed_pa)
    ledger = KeyLedger(**{**asdict(ledger), "net_R": rate})
    logger.info("Step v: privacy amplification done", extra={'extra_fields': {
        'ell': ell, 'net_R': rate, 'pool_consumed': pool.consumed}})

    summary = {
        "n_alice": len(alice),
        "n_bob": len(bob),
        "n_matched": n,
        "E_emp": e_emp,
        "lambda": leaked,
        "verification_passed": verified,
        "ell": ell,
        "ledger": asdict(ledger),
    }
    public = {
        "announced": {"alice": _announced(alice), "bob": _announced(bob)},
        "rule_ciphertext_hex": rule_ct.hex(),
        "negotiation": {
            "ciphertext_hex": ciphertext.hex(),
            "ciphertext_bits": len(ciphertext),
            "matched_phase_bits": n * width,
        },
        "tag_hex": tag_hex,
        "lengths": {
            "rule_bits": len(rule_ct),
            "k_upd_bits": cfg.s,
            "t": cfg.t,
            "tag_bits": consumed_verification,
            "raw_key_bits": n,
            "final_key_bits": ell,
        },
    }
    transcript, digest = build_transcript(summary, cfg, public)
    transcript["transcript_digest"] = digest

    return SessionReport(
        n_alice=len(alice),
        n_bob=len(bob),
        n_matched=n,
        E_emp=e_emp,
        lambda_=leaked,
        verification_passed=verified,
        ell=ell,
        ledger=ledger,
        transcript_digest=digest,
        transcript=transcript,
        key_alice=key_alice,
        key_bob=key_bob,
    )
