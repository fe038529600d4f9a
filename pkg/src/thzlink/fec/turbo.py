"""Rate-1/3 parallel-concatenated convolutional codec.

Two identical 8-state recursive systematic encoders (feedback 1+D^2+D^3,
feedforward 1+D+D^3) joined by a quadratic permutation polynomial
interleaver, both trellises terminated with 3 tail pairs (12 tail bits
total).  Decoding is iterative max-log component decoding with an
early-stop rule on stable hard decisions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .base import DecodeOutcome, as_bits
from .crc import crc_check

# payload length -> (f1, f2) with pi(i) = (f1*i + f2*i^2) mod K
QPP_TABLE = {40: (3, 10), 64: (7, 16), 128: (15, 32), 256: (15, 32), 512: (31, 64)}

TAIL_BITS = 12


def _build_trellis():
    next_state = np.zeros((8, 2), dtype=np.int64)
    parity_out = np.zeros((8, 2), dtype=np.int64)
    for s in range(8):
        r1, r2, r3 = (s >> 2) & 1, (s >> 1) & 1, s & 1
        for u in range(2):
            a = u ^ r2 ^ r3
            parity_out[s, u] = a ^ r1 ^ r3
            next_state[s, u] = (a << 2) | (r1 << 1) | r2
    return next_state, parity_out


_NEXT_STATE, _PARITY_OUT = _build_trellis()


def qpp_interleaver(payload_length: int) -> np.ndarray:
    if payload_length not in QPP_TABLE:
        raise ValueError(f"no interleaver configured for K={payload_length}")
    f1, f2 = QPP_TABLE[payload_length]
    i = np.arange(payload_length, dtype=np.int64)
    perm = (f1 * i + f2 * i * i) % payload_length
    if np.unique(perm).size != payload_length:
        raise ValueError("interleaver coefficients do not permute")
    return perm


@dataclass(frozen=True)
class TurboCode:
    payload_length: int
    crc_poly: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "_perm", qpp_interleaver(self.payload_length))

    @property
    def interleaver(self) -> np.ndarray:
        return self._perm

    @property
    def coded_length(self) -> int:
        return 3 * self.payload_length + TAIL_BITS


def _rsc_encode(bits: np.ndarray):
    """Parity stream plus the 3 terminating (sys, parity) pairs."""
    r1 = r2 = r3 = 0
    parity = np.empty(bits.size, dtype=np.uint8)
    for i, u in enumerate(bits):
        a = int(u) ^ r2 ^ r3
        parity[i] = a ^ r1 ^ r3
        r1, r2, r3 = a, r1, r2
    tail_sys = np.empty(3, dtype=np.uint8)
    tail_par = np.empty(3, dtype=np.uint8)
    for t in range(3):
        u = r2 ^ r3  # forces the feedback to zero
        tail_sys[t] = u
        tail_par[t] = 0 ^ r1 ^ r3
        r1, r2, r3 = 0, r1, r2
    assert (r1, r2, r3) == (0, 0, 0)
    return parity, tail_sys, tail_par


def turbo_encode(payload, code: TurboCode) -> np.ndarray:
    bits = as_bits(payload)
    if bits.shape != (code.payload_length,):
        raise ValueError("payload length must match the configured interleaver")
    par1, t1s, t1p = _rsc_encode(bits)
    par2, t2s, t2p = _rsc_encode(bits[code.interleaver])
    tail1 = np.stack([t1s, t1p], axis=1).reshape(-1)
    tail2 = np.stack([t2s, t2p], axis=1).reshape(-1)
    return np.concatenate([bits, par1, par2, tail1, tail2])


@numba.njit(cache=True)
def _max_log_bcjr(lin, lpar, next_state, parity_out):  # pragma: no cover
    steps = lin.shape[0]
    NEG = -1e30
    alpha = np.full((steps + 1, 8), NEG)
    beta = np.full((steps + 1, 8), NEG)
    alpha[0, 0] = 0.0
    beta[steps, 0] = 0.0
    for k in range(steps):
        for s in range(8):
            if alpha[k, s] > 0.5 * NEG:
                for u in range(2):
                    ns = next_state[s, u]
                    g = 0.5 * ((1.0 - 2.0 * u) * lin[k]
                               + (1.0 - 2.0 * parity_out[s, u]) * lpar[k])
                    v = alpha[k, s] + g
                    if v > alpha[k + 1, ns]:
                        alpha[k + 1, ns] = v
    for k in range(steps - 1, -1, -1):
        for s in range(8):
            best = NEG
            for u in range(2):
                ns = next_state[s, u]
                if beta[k + 1, ns] > 0.5 * NEG:
                    g = 0.5 * ((1.0 - 2.0 * u) * lin[k]
                               + (1.0 - 2.0 * parity_out[s, u]) * lpar[k])
                    v = beta[k + 1, ns] + g
                    if v > best:
                        best = v
            beta[k, s] = best
    post = np.zeros(steps)
    for k in range(steps):
        m0 = NEG
        m1 = NEG
        for s in range(8):
            a = alpha[k, s]
            if a > 0.5 * NEG:
                for u in range(2):
                    b = beta[k + 1, next_state[s, u]]
                    if b > 0.5 * NEG:
                        g = 0.5 * ((1.0 - 2.0 * u) * lin[k]
                                   + (1.0 - 2.0 * parity_out[s, u]) * lpar[k])
                        v = a + g + b
                        if u == 0:
                            if v > m0:
                                m0 = v
                        else:
                            if v > m1:
                                m1 = v
        post[k] = m0 - m1
    return post


def turbo_decode(llrs, code: TurboCode, iterations: int = 8) -> DecodeOutcome:
    """Iterative max-log decoding; positive LLR means bit 0.

    Stops at the iteration cap or as soon as two consecutive iterations
    produce identical hard decisions.  success comes from the attached
    CRC when the code carries one, else it is always claimed.
    """
    llrs = np.asarray(llrs, dtype=float)
    k = code.payload_length
    if llrs.shape != (code.coded_length,):
        raise ValueError("LLR vector length must be 3K + 12")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    perm = code.interleaver
    lsys = llrs[:k]
    lp1 = llrs[k : 2 * k]
    lp2 = llrs[2 * k : 3 * k]
    tail1 = llrs[3 * k : 3 * k + 6]
    tail2 = llrs[3 * k + 6 :]
    sys1 = np.concatenate([lsys, tail1[0::2]])
    par1 = np.concatenate([lp1, tail1[1::2]])
    sys2 = np.concatenate([lsys[perm], tail2[0::2]])
    par2 = np.concatenate([lp2, tail2[1::2]])
    apr1 = np.zeros(k)
    prev_hard = None
    iters_done = 0
    hard = np.zeros(k, dtype=np.uint8)
    for _ in range(iterations):
        lin1 = sys1.copy()
        lin1[:k] += apr1
        post1 = _max_log_bcjr(lin1, par1, _NEXT_STATE, _PARITY_OUT)
        ext1 = post1[:k] - lin1[:k]
        lin2 = sys2.copy()
        lin2[:k] += ext1[perm]
        post2 = _max_log_bcjr(lin2, par2, _NEXT_STATE, _PARITY_OUT)
        ext2 = post2[:k] - lin2[:k]
        apr1 = np.zeros(k)
        apr1[perm] = ext2
        iters_done += 1
        total = lsys + apr1 + ext1
        hard = (total < 0).astype(np.uint8)
        if prev_hard is not None and np.array_equal(hard, prev_hard):
            break
        prev_hard = hard
    visits = 2 * (k + 3) * iters_done
    success = True
    if code.crc_poly is not None:
        success = bool(crc_check(hard, code.crc_poly))
    return DecodeOutcome(info_bits=hard, success=success, node_visits=visits)
