"""Packed binary vectors with popcount-based Hamming arithmetic.

Final concept codes can reach ~1.5M bits at the smallest strides, so they are
stored packed (8 bits per byte via ``np.packbits``) with the logical length
carried separately. All pad bits in the last byte are kept at zero, which
makes byte-level equality and hashing safe.
"""

from __future__ import annotations

import numpy as np

__all__ = ["BitVector"]


def _mask_pad_bits(packed: np.ndarray, n_bits: int) -> np.ndarray:
    tail = n_bits % 8
    if tail and packed.size:
        packed = packed.copy()
        packed[-1] &= np.uint8(0xFF << (8 - tail) & 0xFF)
    return packed


class BitVector:
    """An immutable bit vector of fixed length.

    Parameters
    ----------
    packed : uint8 array of ``ceil(n_bits / 8)`` bytes, most-significant bit
        first (the ``np.packbits`` convention).
    n_bits : logical number of bits.
    """

    __slots__ = ("packed", "n_bits")

    def __init__(self, packed: np.ndarray, n_bits: int):
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.ndim != 1:
            raise ValueError("packed buffer must be one-dimensional")
        if packed.size != (n_bits + 7) // 8:
            raise ValueError(
                f"buffer of {packed.size} bytes cannot hold exactly {n_bits} bits"
            )
        packed = _mask_pad_bits(packed, n_bits)
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)
        object.__setattr__(self, "n_bits", int(n_bits))

    def __setattr__(self, name, value):
        raise AttributeError("BitVector is immutable")

    @classmethod
    def from_bools(cls, bits) -> "BitVector":
        bits = np.asarray(bits, dtype=bool).ravel()
        return cls(np.packbits(bits), bits.size)

    def to_bools(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.n_bits).astype(bool)

    def popcount(self) -> int:
        return int(np.bitwise_count(self.packed).sum())

    def hamming_distance(self, other: "BitVector") -> int:
        if self.n_bits != other.n_bits:
            raise ValueError(
                f"length mismatch: {self.n_bits} vs {other.n_bits} bits"
            )
        return int(np.bitwise_count(self.packed ^ other.packed).sum())

    def hamming_similarity(self, other: "BitVector") -> float:
        """1 - (differing bits / total bits); 1.0 means identical."""
        if self.n_bits == 0:
            raise ValueError("similarity undefined for empty vectors")
        return 1.0 - self.hamming_distance(other) / self.n_bits

    def to_hex(self) -> str:
        return self.packed.tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, n_bits: int) -> "BitVector":
        return cls(np.frombuffer(bytes.fromhex(text), dtype=np.uint8), n_bits)

    def __len__(self) -> int:
        return self.n_bits

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self.n_bits == other.n_bits and np.array_equal(
            self.packed, other.packed
        )

    def __hash__(self) -> int:
        return hash((self.n_bits, self.packed.tobytes()))

    def __repr__(self) -> str:
        ones = self.popcount()
        return f"BitVector(n_bits={self.n_bits}, ones={ones})"
