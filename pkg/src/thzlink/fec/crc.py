"""CRC attach/check over GF(2), MSB-first.

The remainder is a linear map of the message, so each (poly, length) pair
gets a cached generator matrix and both single and batched words go
through one integer matmul.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .base import as_bits

DEFAULT_CRC_POLY = "100000111"  # x^8 + x^2 + x + 1


def poly_bits(poly) -> np.ndarray:
    if isinstance(poly, str):
        arr = np.array([int(c) for c in poly], dtype=np.uint8)
    else:
        arr = as_bits(poly)
    if arr.size < 2 or arr[0] != 1:
        raise ValueError("polynomial must start with its leading 1 term")
    return arr


def crc_len(poly) -> int:
    return poly_bits(poly).size - 1


def _long_division_remainder(bits: np.ndarray, p: np.ndarray) -> np.ndarray:
    r = p.size - 1
    reg = np.concatenate([bits, np.zeros(r, dtype=np.uint8)])
    for i in range(bits.size):
        if reg[i]:
            reg[i : i + r + 1] ^= p
    return reg[-r:]


@lru_cache(maxsize=64)
def _remainder_matrix(poly: str, length: int) -> np.ndarray:
    """[r, length] matrix mapping a message to its CRC remainder."""
    p = poly_bits(poly)
    cols = np.empty((length, p.size - 1), dtype=np.uint8)
    unit = np.zeros(length, dtype=np.uint8)
    for i in range(length):
        unit[i] = 1
        cols[i] = _long_division_remainder(unit, p)
        unit[i] = 0
    return np.ascontiguousarray(cols.T)


def _poly_key(poly) -> str:
    return "".join(str(int(b)) for b in poly_bits(poly))


def crc_remainder(payload, poly=DEFAULT_CRC_POLY) -> np.ndarray:
    bits = as_bits(payload)
    flat = bits.reshape(-1, bits.shape[-1]) if bits.ndim > 1 else bits[None]
    g = _remainder_matrix(_poly_key(poly), flat.shape[-1])
    rem = (flat.astype(np.int64) @ g.T.astype(np.int64)) & 1
    rem = rem.astype(np.uint8)
    return rem.reshape(bits.shape[:-1] + (g.shape[0],)) if bits.ndim > 1 else rem[0]


def crc_attach(payload, poly=DEFAULT_CRC_POLY) -> np.ndarray:
    bits = as_bits(payload)
    if bits.shape[-1] == 0:
        raise ValueError("payload must be nonempty")
    return np.concatenate([bits, crc_remainder(bits, poly)], axis=-1)


def crc_check(bits, poly=DEFAULT_CRC_POLY):
    """True when the word (payload with appended CRC) has zero remainder.

    Accepts a single word or a batch with words along the last axis.
    """
    rem = crc_remainder(bits, poly)
    ok = ~np.any(rem, axis=-1)
    return bool(ok) if np.isscalar(ok) or ok.ndim == 0 else ok
