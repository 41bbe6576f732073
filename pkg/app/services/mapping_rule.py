"""Per-session random mapping between global phases and bit substrings.

The rule is built from a random bit stream by first appearance: the stream is
cut into log2(m)-bit blocks and each value not yet seen becomes the next
table entry c_j. Phase index j (global phase 2*pi*j/m) carries substring c_j.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from app.errors import DomainError, EntropyExhausted, LengthMismatch, MalformedRule
from app.services.bits import BitString
from app.services.coherent_math import log_factorial

logger = logging.getLogger(__name__)


def block_width(m: int) -> int:
    """log2(m) for a power-of-two phase count."""
    if m < 2 or m & (m - 1):
        raise DomainError(f"phase count must be a power of two >= 2, got m={m}")
    return m.bit_length() - 1


@dataclass(frozen=True, eq=False)
class MappingRule:
    """
    Bijection between phase indices and log2(m)-bit substrings.

    Attributes:
        m: Number of global phases
        forward: forward[j] is the MSB-first value of substring c_j
        inverse: inverse[v] is the phase index carrying substring value v
    """
    m: int
    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        block_width(self.m)
        forward = np.asarray(self.forward, dtype=np.int64).copy()
        if forward.shape != (self.m,) or not np.array_equal(np.sort(forward), np.arange(self.m)):
            raise MalformedRule("mapping table is not a permutation of all substrings")
        inverse = np.empty(self.m, dtype=np.int64)
        inverse[forward] = np.arange(self.m)
        forward.setflags(write=False)
        inverse.setflags(write=False)
        object.__setattr__(self, "forward", forward)
        object.__setattr__(self, "inverse", inverse)

    @classmethod
    def from_forward(cls, forward) -> "MappingRule":
        forward = np.asarray(forward, dtype=np.int64)
        return cls(m=int(forward.size), forward=forward, inverse=forward)

    @classmethod
    def identity(cls, m: int) -> "MappingRule":
        """forward[j] = j; handy for tests and for worked examples."""
        return cls.from_forward(np.arange(m))

    @property
    def width(self) -> int:
        return block_width(self.m)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MappingRule):
            return NotImplemented
        return self.m == other.m and bool(np.array_equal(self.forward, other.forward))

    def __hash__(self) -> int:
        return hash((self.m, self.forward.tobytes()))

    def serialize(self) -> BitString:
        """c_0 || c_1 || ... || c_{m-1}, MSB-first per block."""
        return BitString.from_blocks(self.forward, self.width)


class RuleKeyCost(NamedTuple):
    """Pre-shared bits spent on shipping a rule, and the entropy it carries."""
    bits: int  # m * log2(m)
    log2_factorial: float  # log2(m!)


def generate_rule(entropy: BitString, m: int) -> MappingRule:
    """
    Build a rule from a random bit stream by first appearance of each block.

    Raises:
        LengthMismatch: If the stream is not a whole number of blocks
        EntropyExhausted: If the stream ends before every value has appeared
    """
    width = block_width(m)
    if len(entropy) % width:
        raise LengthMismatch(f"entropy length {len(entropy)} is not a multiple of {width}")

    values = entropy.blocks(width)
    # np.unique returns the first index of each distinct value
    distinct, first_seen = np.unique(values, return_index=True)
    if distinct.size < m:
        raise EntropyExhausted(seen=int(distinct.size), m=m)

    forward = values[np.sort(first_seen)]
    rule = MappingRule.from_forward(forward)
    logger.debug(
        "Mapping rule generated",
        extra={'extra_fields': {'m': m, 'blocks_scanned': int(values.size)}}
    )
    return rule


def generate_rule_from_rng(rng: np.random.Generator, m: int, blocks_per_value: int = 10) -> MappingRule:
    """
    Draw entropy from ``rng`` until a complete rule can be built.

    Starts with ``blocks_per_value * m`` blocks and extends the stream on
    EntropyExhausted instead of aborting.
    """
    width = block_width(m)
    stream = BitString.random(rng, blocks_per_value * m * width)
    while True:
        try:
            return generate_rule(stream, m)
        except EntropyExhausted as exc:
            logger.info(
                "Extending mapping-rule entropy stream",
                extra={'extra_fields': {'seen': exc.seen, 'm': m, 'bits': len(stream)}}
            )
            stream = BitString.concat([stream, BitString.random(rng, m * width)])


def phase_index_of(rule: MappingRule, x: BitString) -> int:
    """Phase index j whose substring c_j equals ``x``."""
    if len(x) != rule.width:
        raise LengthMismatch(f"substring must have {rule.width} bits, got {len(x)}")
    return int(rule.inverse[int(x.blocks(rule.width)[0])])


def substring_of(rule: MappingRule, j: int) -> BitString:
    """Substring c_j carried by phase index ``j``."""
    if not 0 <= j < rule.m:
        raise DomainError(f"phase index must satisfy 0 <= j < {rule.m}, got {j}")
    return BitString.from_blocks([int(rule.forward[j])], rule.width)


def otp_encrypt_rule(rule: MappingRule, key: BitString) -> BitString:
    """One-time-pad the serialized rule with an m*log2(m)-bit key."""
    plain = rule.serialize()
    if len(key) != len(plain):
        raise LengthMismatch(f"rule OTP key must have {len(plain)} bits, got {len(key)}")
    return plain ^ key


def otp_decrypt_rule(ciphertext: BitString, key: BitString, m: int) -> MappingRule:
    """
    Recover a rule from its one-time-padded serialization.

    Raises:
        MalformedRule: If the decrypted table is not a permutation
    """
    width = block_width(m)
    if len(ciphertext) != m * width or len(key) != m * width:
        raise LengthMismatch(
            f"rule ciphertext and key must both have {m * width} bits, "
            f"got {len(ciphertext)} and {len(key)}"
        )
    return MappingRule.from_forward((ciphertext ^ key).blocks(width))


def rule_key_cost(m: int) -> RuleKeyCost:
    """m*log2(m) OTP bits, compared against the log2(m!) bits a permutation holds."""
    width = block_width(m)
    return RuleKeyCost(bits=m * width, log2_factorial=log_factorial(m) / math.log(2))
