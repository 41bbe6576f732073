"""Exception types raised by the PKD services.

Every error carries a stable ``code`` (used in API responses and logs) and the
process ``exit_code`` the CLI reports for it.
"""
from typing import Optional


class PKDError(Exception):
    """
    Base class for all protocol and numerics errors.

    Attributes:
        code: Stable machine-readable identifier
        exit_code: CLI exit status for this failure
        message: Human-readable explanation
    """

    code = "pkd_error"
    exit_code = 1
    http_status = 400

    def __init__(self, message: Optional[str] = None):
        self.message = message or self.__class__.__doc__.strip().splitlines()[0]
        super().__init__(self.message)


class DomainError(PKDError, ValueError):
    """Parameter lies outside the validity domain of a formula."""

    code = "domain_error"
    exit_code = 2


class LengthMismatch(PKDError, ValueError):
    """Bit-string length does not match the required shape."""

    code = "length_mismatch"
    exit_code = 2


class EntropyExhausted(PKDError):
    """
    Entropy stream ended before every phase substring appeared.

    Retryable: the caller may extend the stream and generate again.
    """

    code = "entropy_exhausted"

    def __init__(self, seen: int, m: int):
        self.seen = seen
        self.m = m
        super().__init__(
            f"Entropy stream exhausted after {seen} of {m} distinct substrings; "
            "supply more random bits"
        )


class MalformedRule(PKDError):
    """Decrypted mapping table is not a permutation (wrong key or tampering)."""

    code = "malformed_rule"


class InsufficientKeyPool(PKDError):
    """Pre-shared key pool cannot cover the bits this session consumes."""

    code = "insufficient_key_pool"
    exit_code = 3
    http_status = 409

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(
            f"Key pool has {available} bits left but {requested} are required"
        )


class NegotiationOverflow(PKDError):
    """Phase bits to negotiate exceed the Toeplitz output length t."""

    code = "negotiation_overflow"
    exit_code = 4
    http_status = 409

    def __init__(self, needed: int, t: int):
        self.needed = needed
        self.t = t
        super().__init__(f"Negotiation needs {needed} bits but t={t}")


class VerificationFailed(PKDError):
    """Error-verification tags of Alice and Bob differ."""

    code = "verification_failed"
    exit_code = 5
