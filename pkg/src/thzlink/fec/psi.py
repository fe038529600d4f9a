"""Pseudo-LLR construction from hard bits plus per-bit PSI tags."""
from __future__ import annotations

import numpy as np

from .base import ReliabilityVector, as_bits

DEFAULT_PSI_LLR_SCALE = 4.0


def llrs_from_psi(hard_bits, psi_tags, scale: float = DEFAULT_PSI_LLR_SCALE) -> np.ndarray:
    """Signed pseudo-LLRs: lambda_i = scale * psi_i * (1 - 2 b_i).

    The sign carries the hard decision, the magnitude the layer's
    effective SNR; scale sets the overall confidence handed to decoders
    that care about absolute LLR values.
    """
    bits = as_bits(hard_bits)
    psi = np.asarray(psi_tags, dtype=float)
    if bits.shape != psi.shape:
        raise ValueError("hard bits and psi tags must have matching shapes")
    if np.any(psi < 0) or not np.all(np.isfinite(psi)):
        raise ValueError("psi tags must be finite and nonnegative")
    return scale * psi * (1.0 - 2.0 * bits.astype(float))


def psi_reliability(psi_tags) -> ReliabilityVector:
    psi = np.asarray(psi_tags, dtype=float)
    if psi.size and np.ptp(psi) == 0:
        return ReliabilityVector(psi, "hard-uniform")
    return ReliabilityVector(psi, "psi")
