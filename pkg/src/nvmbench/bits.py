"""Byte/bit helpers shared across the device model, encoders and experiments.

Bit order convention: index 0 is the most significant bit of a byte, matching
``np.unpackbits``. Wear arrays of shape (n, 8) follow the same order.
"""

import numpy as np

# Lookup tables indexed by byte value.
POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1).astype(np.int64)
BYTE_BITS = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).astype(np.int64)
# Weights to pack a (n, 8) bit matrix back into bytes: bit 0 is the MSB.
PACK_WEIGHTS = (1 << np.arange(7, -1, -1)).astype(np.uint8)


def hamming8(a: int, b: int) -> int:
    """Number of differing bit positions between two byte values."""
    if not (0 <= a <= 0xFF and 0 <= b <= 0xFF):
        raise ValueError(f"byte values out of range: {a!r}, {b!r}")
    return (a ^ b).bit_count()


def unpack_bits(values: np.ndarray) -> np.ndarray:
    """Expand a uint8 vector into an (n, 8) 0/1 int64 matrix."""
    return BYTE_BITS[values]


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unpack_bits` for an (n, 8) 0/1 matrix."""
    return (bits.astype(np.uint8) * PACK_WEIGHTS).sum(axis=1).astype(np.uint8)
