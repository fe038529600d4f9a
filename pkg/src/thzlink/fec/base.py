"""Shared decoder-facing types."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RELIABILITY_KINDS = ("hard-uniform", "psi", "soft")


@dataclass(frozen=True)
class DecodeOutcome:
    info_bits: np.ndarray
    success: bool
    queries: int = 0
    node_visits: int = 0
    abandoned: bool = False


@dataclass(frozen=True)
class ReliabilityVector:
    """Per-bit reliability weights guiding a decoder.

    kind records where the values came from: "hard-uniform" (no side
    information, all entries equal), "psi" (detector effective-SNR tags)
    or "soft" (true LLR magnitudes).
    """

    values: np.ndarray
    kind: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("reliability values must be one-dimensional")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("reliability values must be finite and nonnegative")
        if self.kind not in RELIABILITY_KINDS:
            raise ValueError(f"unknown reliability kind {self.kind!r}")
        if self.kind == "hard-uniform" and values.size and np.ptp(values) != 0:
            raise ValueError("hard-uniform reliabilities must be constant")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def hard_uniform(cls, length: int) -> "ReliabilityVector":
        return cls(np.ones(length), "hard-uniform")


def as_bits(bits) -> np.ndarray:
    out = np.asarray(bits, dtype=np.uint8)
    if np.any(out > 1):
        raise ValueError("bit arrays may contain only 0 and 1")
    return out
