"""GF(2) Toeplitz hashing.

One seed h_0 ... h_{s+t-2} defines the s x t matrix

    H[i][j] = h_{s-1-i+j}

whose first row is h_{s-1} ... h_{s+t-2} (top-right entry h_{s+t-2}) and whose
first column runs from h_{s-1} down to h_0. Two products use it:

* ``toeplitz_product``: row vector times H, d_j = XOR_i v_i h_{s+j-i-1}
  (key expansion for the phase negotiation).
* ``compress``: H times column vector, out_i = XOR_j H[i][j] v_j
  (privacy amplification and MAC cores).

Packed kernels treat Python ints as little-endian bit registers (bit a of
the seed int is h_a); naive double loops are kept as the normative reference.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz as dense_toeplitz
from scipy.signal import fftconvolve

from app.errors import LengthMismatch
from app.services.bits import BitString

logger = logging.getLogger(__name__)

# rows * cols above which compress switches to FFT correlation
FFT_COMPRESS_THRESHOLD = 1 << 34


@dataclass(frozen=True)
class ToeplitzSeed:
    """
    Seed of an s x t Toeplitz matrix over GF(2).

    Attributes:
        bits: h_0 ... h_{rows+cols-2}
        rows: s
        cols: t
    """
    bits: BitString
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise LengthMismatch(f"Toeplitz shape must be positive, got {self.rows}x{self.cols}")
        if len(self.bits) != self.rows + self.cols - 1:
            raise LengthMismatch(
                f"{self.rows}x{self.cols} Toeplitz seed needs {self.rows + self.cols - 1} bits, "
                f"got {len(self.bits)}"
            )

    @classmethod
    def random(cls, rng: np.random.Generator, rows: int, cols: int) -> "ToeplitzSeed":
        return cls(bits=BitString.random(rng, rows + cols - 1), rows=rows, cols=cols)

    @functools.cached_property
    def packed(self) -> int:
        return self.bits.to_int()


def toeplitz_matrix(seed: ToeplitzSeed) -> np.ndarray:
    """Explicit rows x cols 0/1 matrix; only sensible for small shapes."""
    h = seed.bits.bits
    first_col = h[seed.rows - 1::-1]
    first_row = h[seed.rows - 1:]
    return dense_toeplitz(first_col, first_row).astype(np.uint8)


# =============================================================================
# ROW-VECTOR PRODUCT  D = v . H
# =============================================================================

def toeplitz_product(seed: ToeplitzSeed, v: BitString) -> BitString:
    """
    d_j = XOR_{i} v_i h_{s+j-i-1} for j = 0 .. t-1.

    Each set bit v_i contributes row i of H, which is the seed register
    shifted right by s-1-i; the cols-bit mask is applied once at the end.
    """
    if len(v) != seed.rows:
        raise LengthMismatch(f"product input must have {seed.rows} bits, got {len(v)}")

    register = seed.packed
    acc = 0
    for i in np.flatnonzero(v.bits):
        acc ^= register >> (seed.rows - 1 - int(i))
    return BitString.from_int(acc & ((1 << seed.cols) - 1), seed.cols)


def naive_toeplitz_product(seed: ToeplitzSeed, v: BitString) -> BitString:
    """Reference: each output bit evaluated from the defining sum."""
    if len(v) != seed.rows:
        raise LengthMismatch(f"product input must have {seed.rows} bits, got {len(v)}")
    h = seed.bits.bits
    s = seed.rows
    i = np.arange(s)
    out = [int(np.bitwise_xor.reduce(v.bits & h[s + j - i - 1])) for j in range(seed.cols)]
    return BitString(np.array(out, dtype=np.uint8))


# =============================================================================
# COLUMN-VECTOR PRODUCT  out = H . v
# =============================================================================

def compress(seed: ToeplitzSeed, v: BitString) -> BitString:
    """
    out_i = XOR_j h_{(rows-1)+j-i} v_j for i = 0 .. rows-1.

    Small shapes use a packed AND-and-parity kernel; very large shapes use
    FFT correlation, which is exact after rounding for 0/1 inputs.
    """
    if len(v) != seed.cols:
        raise LengthMismatch(f"compress input must have {seed.cols} bits, got {len(v)}")
    if seed.rows * seed.cols > FFT_COMPRESS_THRESHOLD:
        return _compress_fft(seed, v)

    register = seed.packed
    value = v.to_int()
    out = np.empty(seed.rows, dtype=np.uint8)
    for i in range(seed.rows):
        out[i] = (value & (register >> (seed.rows - 1 - i))).bit_count() & 1
    return BitString(out)


def _compress_fft(seed: ToeplitzSeed, v: BitString) -> BitString:
    h = seed.bits.bits.astype(np.float64)
    conv = fftconvolve(h, v.bits[::-1].astype(np.float64))
    window = conv[seed.cols - 1:seed.rows + seed.cols - 1][::-1]
    logger.debug(
        "Compressed via FFT correlation",
        extra={'extra_fields': {'rows': seed.rows, 'cols': seed.cols}}
    )
    return BitString((np.rint(window).astype(np.int64) & 1).astype(np.uint8))


def naive_compress(seed: ToeplitzSeed, v: BitString) -> BitString:
    """Reference: each output bit evaluated from the defining sum of ``compress``."""
    if len(v) != seed.cols:
        raise LengthMismatch(f"compress input must have {seed.cols} bits, got {len(v)}")
    h = seed.bits.bits
    j = np.arange(seed.cols)
    out = [int(np.bitwise_xor.reduce(h[(seed.rows - 1) + j - i] & v.bits)) for i in range(seed.rows)]
    return BitString(np.array(out, dtype=np.uint8))


# =============================================================================
# MAC
# =============================================================================

def mac_tag(seed: ToeplitzSeed, otp: BitString, message: BitString) -> BitString:
    """Wegman-Carter tag: compress(seed, message) XOR otp."""
    if len(otp) != seed.rows:
        raise LengthMismatch(f"tag OTP must have {seed.rows} bits, got {len(otp)}")
    return compress(seed, message) ^ otp


def mac_verify(seed: ToeplitzSeed, otp: BitString, message: BitString, tag: BitString) -> bool:
    if len(tag) != seed.rows:
        return False
    return mac_tag(seed, otp, message) == tag
