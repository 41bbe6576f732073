"""Immutable bit strings backed by numpy arrays.

Two integer views exist and must not be confused:

* ``to_int`` / ``from_int`` are little-endian: bit ``i`` of the string is
  ``(value >> i) & 1``. The Toeplitz kernels use this view, so a Python int
  acts as a word-packed register.
* ``blocks`` / ``from_blocks`` read fixed-width blocks MSB-first, so the
  decimal value of a block equals its textual binary reading.
"""
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from app.errors import LengthMismatch

BitOrder = Literal["big", "little"]


def _as_bit_array(values: Union[Sequence[int], np.ndarray]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint8).reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("Bit strings may only contain 0 and 1")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BitString:
    """
    Ordered sequence of bits.

    Attributes:
        bits: Read-only uint8 array of 0/1 values
    """
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _as_bit_array(self.bits))

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        """Parse a string such as ``"1011 0010"``; whitespace is ignored."""
        cleaned = "".join(text.split())
        if any(c not in "01" for c in cleaned):
            raise ValueError(f"Not a bit string: {text!r}")
        return cls(np.frombuffer(cleaned.encode(), dtype=np.uint8) - ord("0"))

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(np.zeros(length, dtype=np.uint8))

    @classmethod
    def random(cls, rng: np.random.Generator, length: int) -> "BitString":
        """Draw ``length`` uniform bits from a seeded generator."""
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8))

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        """Little-endian: bit i of the result is bit i of ``value``."""
        if value < 0:
            raise ValueError("value must be non-negative")
        if length == 0:
            return cls.zeros(0)
        value &= (1 << length) - 1
        raw = value.to_bytes((length + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        return cls(bits[:length])

    @classmethod
    def from_blocks(cls, values: Iterable[int], width: int) -> "BitString":
        """Concatenate ``width``-bit MSB-first encodings of ``values``."""
        vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                          dtype=np.int64).reshape(-1)
        if width == 0 or vals.size == 0:
            return cls.zeros(0)
        shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
        return cls(((vals[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1))

    @classmethod
    def concat(cls, parts: Iterable["BitString"]) -> "BitString":
        arrays = [p.bits for p in parts]
        if not arrays:
            return cls.zeros(0)
        return cls(np.concatenate(arrays))

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.bits.size)

    def __iter__(self):
        return iter(int(b) for b in self.bits)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BitString(self.bits[item])
        return int(self.bits[item])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return len(self) == len(other) and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((len(self), self.bits.tobytes()))

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise LengthMismatch(f"XOR of {len(self)}-bit and {len(other)}-bit strings")
        return BitString(self.bits ^ other.bits)

    def __str__(self) -> str:
        return (self.bits + ord("0")).tobytes().decode()

    def __repr__(self) -> str:
        text = str(self)
        if len(text) > 64:
            text = text[:61] + "..."
        return f"BitString({len(self)}: {text})"

    def count_ones(self) -> int:
        return int(self.bits.sum(dtype=np.int64))

    def to_int(self) -> int:
        """Little-endian integer view (bit i -> 2**i)."""
        if not len(self):
            return 0
        return int.from_bytes(np.packbits(self.bits, bitorder="little").tobytes(), "little")

    def blocks(self, width: int) -> np.ndarray:
        """Split into ``width``-bit blocks and return their MSB-first values."""
        if width <= 0 or len(self) % width:
            raise LengthMismatch(f"{len(self)} bits do not split into {width}-bit blocks")
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
        return self.bits.reshape(-1, width).astype(np.int64) @ weights

    def to_bytes(self, order: BitOrder = "big") -> bytes:
        """Pack into bytes, zero-padding the final byte."""
        return np.packbits(self.bits, bitorder=order).tobytes()

    def hex(self, order: BitOrder = "big") -> str:
        return self.to_bytes(order).hex()
