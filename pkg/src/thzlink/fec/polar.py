"""CRC-aided polar codes: construction, encoding, SC-List decoding.

The frozen set comes from Gaussian-approximation density evolution at a
configurable design SNR.  The transform is the natural-order butterfly
network (self-inverse over GF(2)); leaf index bits are consumed MSB
first, matching the check-then-variable split of the construction.

The list decoder keeps per-path LLR and partial-sum workspaces packed in
flat arrays indexed by per-level offsets and runs as one compiled kernel;
path metrics use the sign-mismatch penalty rule, and the surviving list
is kept sorted by metric (stable, so earlier paths win ties).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import exp, log2, pi, sqrt

import numba
import numpy as np

from .base import DecodeOutcome, as_bits
from .crc import DEFAULT_CRC_POLY, crc_check, crc_len


@dataclass(frozen=True)
class PolarCode:
    block_length: int
    info_length: int
    frozen_set: tuple
    crc_poly: str | None = DEFAULT_CRC_POLY

    def __post_init__(self):
        n, k = self.block_length, self.info_length
        if n < 2 or n & (n - 1):
            raise ValueError("block_length must be a power of two >= 2")
        if not 0 < k < n:
            raise ValueError("info_length must satisfy 0 < K < N")
        frozen = tuple(sorted(int(i) for i in self.frozen_set))
        if len(frozen) != n - k or len(set(frozen)) != len(frozen):
            raise ValueError("frozen_set must hold N - K distinct indices")
        if frozen and not (0 <= frozen[0] and frozen[-1] < n):
            raise ValueError("frozen indices out of range")
        if self.crc_poly is not None and self.payload_length < 1:
            raise ValueError("info_length too small for the CRC")
        object.__setattr__(self, "frozen_set", frozen)

    @property
    def crc_bits(self) -> int:
        return 0 if self.crc_poly is None else crc_len(self.crc_poly)

    @property
    def payload_length(self) -> int:
        return self.info_length - self.crc_bits

    @property
    def info_indices(self) -> np.ndarray:
        mask = np.ones(self.block_length, dtype=bool)
        mask[list(self.frozen_set)] = False
        return np.nonzero(mask)[0]


def _phi(x: float) -> float:
    if x <= 0.0:
        return 1.0
    if x < 10.0:
        return exp(-0.4527 * x ** 0.86 + 0.0218)
    return sqrt(pi / x) * exp(-x / 4.0) * (1.0 - 10.0 / (7.0 * x))


def _phi_inv(y: float) -> float:
    lo, hi = 1e-12, 1.0
    while _phi(hi) > y:
        hi *= 2.0
        if hi > 1e9:
            return hi
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if _phi(mid) > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=32)
def design_frozen_set(block_length: int, info_length: int,
                      design_snr_db: float = 2.0) -> tuple:
    """Gaussian-approximation construction at the given design SNR.

    Tracks the mean of each synthesized channel's LLR starting from
    2/sigma^2; the N-K smallest-mean indices are frozen (stable order on
    ties).
    """
    if block_length < 2 or block_length & (block_length - 1):
        raise ValueError("block_length must be a power of two")
    sigma_sq = 10.0 ** (-design_snr_db / 10.0)
    means = np.array([2.0 / sigma_sq])
    for _ in range(int(log2(block_length))):
        checks = np.empty_like(means)
        for i, m in enumerate(means):
            p = _phi(m)
            checks[i] = _phi_inv(p * (2.0 - p))
        means = np.concatenate([checks, 2.0 * means])
    order = np.argsort(means, kind="stable")
    return tuple(sorted(int(i) for i in order[: block_length - info_length]))


def make_polar_code(block_length: int, info_length: int,
                    crc_poly: str | None = DEFAULT_CRC_POLY,
                    design_snr_db: float = 2.0) -> PolarCode:
    frozen = design_frozen_set(block_length, info_length, design_snr_db)
    return PolarCode(block_length, info_length, frozen, crc_poly)


def polar_transform(bits) -> np.ndarray:
    """Butterfly transform along the last axis; its own inverse."""
    x = as_bits(bits).copy()
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    flat = x.reshape(-1, n)
    span = 1
    while span < n:
        v = flat.reshape(-1, n // (2 * span), 2, span)
        v[:, :, 0, :] ^= v[:, :, 1, :]
        span *= 2
    return x


def polar_encode(info_plus_crc, code: PolarCode) -> np.ndarray:
    bits = as_bits(info_plus_crc)
    if bits.shape[-1] != code.info_length:
        raise ValueError("input length must equal the code's info length")
    shape = bits.shape[:-1] + (code.block_length,)
    u = np.zeros(shape, dtype=np.uint8)
    u[..., code.info_indices] = bits
    return polar_transform(u)


def polar_membership(code: PolarCode):
    """Joint frozen-bit plus CRC membership predicate, batch callable."""
    frozen = np.array(code.frozen_set, dtype=np.int64)
    info_idx = code.info_indices

    def predicate(words):
        w = as_bits(words)
        single = w.ndim == 1
        w2 = w[None] if single else w.reshape(-1, w.shape[-1])
        u = polar_transform(w2)
        ok = ~np.any(u[:, frozen], axis=1) if frozen.size else np.ones(len(u), bool)
        if code.crc_poly is not None and np.any(ok):
            ok[ok] = crc_check(u[np.nonzero(ok)[0]][:, info_idx], code.crc_poly)
        if single:
            return bool(ok[0])
        return ok.reshape(w.shape[:-1])

    return predicate


def extract_info_bits(code: PolarCode, words) -> np.ndarray:
    """Payload bits (CRC stripped) read back out of codeword-domain words."""
    u = polar_transform(words)
    bits = u[..., code.info_indices]
    return bits[..., : code.payload_length]


@numba.njit(cache=True)
def _scl_kernel(llr0, frozen_mask, list_size):  # pragma: no cover - compiled
    n_code = llr0.shape[0]
    n_lev = 0
    while (1 << n_lev) < n_code:
        n_lev += 1
    off = np.zeros(n_lev + 2, dtype=np.int64)
    for lam in range(1, n_lev + 1):
        off[lam + 1] = off[lam] + (n_code >> lam)
    total = off[n_lev + 1]
    L = list_size
    P = np.zeros((L, total))
    C = np.zeros((L, 2, total), dtype=np.uint8)
    U = np.zeros((L, n_code), dtype=np.uint8)
    pm = np.zeros(L)
    P2 = np.zeros((L, total))
    C2 = np.zeros((L, 2, total), dtype=np.uint8)
    U2 = np.zeros((L, n_code), dtype=np.uint8)
    perm = np.zeros(L, dtype=np.int64)
    cand_pm = np.zeros(2 * L)
    order = np.zeros(2 * L, dtype=np.int64)
    active = 1
    visits = 0
    leaf = off[n_lev]
    for phi in range(n_code):
        if phi == 0:
            start = 1
        else:
            d = 0
            t = phi
            while t & 1 == 0:
                d += 1
                t >>= 1
            lam_g = n_lev - d
            S = n_code >> lam_g
            for p in range(active):
                for j in range(S):
                    if lam_g == 1:
                        a = llr0[j]
                        b = llr0[j + S]
                    else:
                        a = P[p, off[lam_g - 1] + j]
                        b = P[p, off[lam_g - 1] + j + S]
                    u = C[p, 0, off[lam_g] + j]
                    P[p, off[lam_g] + j] = b + (1.0 - 2.0 * u) * a
            start = lam_g + 1
        for lam in range(start, n_lev + 1):
            S = n_code >> lam
            for p in range(active):
                for j in range(S):
                    if lam == 1:
                        a = llr0[j]
                        b = llr0[j + S]
                    else:
                        a = P[p, off[lam - 1] + j]
                        b = P[p, off[lam - 1] + j + S]
                    aa = a if a >= 0.0 else -a
                    ab = b if b >= 0.0 else -b
                    m = aa if aa < ab else ab
                    if (a >= 0.0) != (b >= 0.0):
                        m = -m
                    P[p, off[lam] + j] = m
        visits += active
        if frozen_mask[phi]:
            for p in range(active):
                l = P[p, leaf]
                C[p, phi & 1, leaf] = 0
                if l < 0.0:
                    pm[p] -= l
            # keep ranks sorted by metric (stable insertion on indirection)
            for i in range(1, active):
                key = perm[i]
                kpm = pm[key]
                j = i - 1
                while j >= 0 and pm[perm[j]] > kpm:
                    perm[j + 1] = perm[j]
                    j -= 1
                perm[j + 1] = key
        else:
            nc = 2 * active
            keep = nc if nc < L else L
            for r in range(active):
                s = perm[r]
                l = P[s, leaf]
                pen = l if l >= 0.0 else -l
                if l < 0.0:
                    cand_pm[2 * r] = pm[s] + pen
                    cand_pm[2 * r + 1] = pm[s]
                else:
                    cand_pm[2 * r] = pm[s]
                    cand_pm[2 * r + 1] = pm[s] + pen
            for i in range(nc):
                order[i] = i
            for i in range(1, nc):
                key = order[i]
                kpm = cand_pm[key]
                j = i - 1
                while j >= 0 and cand_pm[order[j]] > kpm:
                    order[j + 1] = order[j]
                    j -= 1
                order[j + 1] = key
            for newr in range(keep):
                c = order[newr]
                src = perm[c >> 1]
                bit = np.uint8(c & 1)
                P2[newr, :] = P[src, :]
                C2[newr, 0, :] = C[src, 0, :]
                C2[newr, 1, :] = C[src, 1, :]
                U2[newr, :] = U[src, :]
                U2[newr, phi] = bit
                C2[newr, phi & 1, leaf] = bit
            tP = P
            P = P2
            P2 = tP
            tC = C
            C = C2
            C2 = tC
            tU = U
            U = U2
            U2 = tU
            for newr in range(keep):
                pm[newr] = cand_pm[order[newr]]
                perm[newr] = newr
            active = keep
        if phi & 1:
            for p in range(active):
                lam = n_lev
                ph = phi
                while ph & 1 and lam > 1:
                    ps = ph >> 1
                    S = n_code >> lam
                    for j in range(S):
                        c0 = C[p, 0, off[lam] + j]
                        c1 = C[p, 1, off[lam] + j]
                        C[p, ps & 1, off[lam - 1] + j] = c0 ^ c1
                        C[p, ps & 1, off[lam - 1] + j + S] = c1
                    ph = ps
                    lam -= 1
    U_out = np.zeros((L, n_code), dtype=np.uint8)
    pm_out = np.zeros(L)
    for r in range(active):
        U_out[r, :] = U[perm[r], :]
        pm_out[r] = pm[perm[r]]
    return U_out, pm_out, active, visits


def sc_list_decode(channel_llrs, code: PolarCode, list_size: int = 8) -> DecodeOutcome:
    """SC-List decoding; the CRC picks among the surviving paths.

    Positive LLR means bit 0.  Without a CRC the best-metric path wins
    and success is always claimed; with one, no passing path means the
    best-metric payload with success=false.
    """
    llrs = np.ascontiguousarray(channel_llrs, dtype=np.float64)
    if llrs.shape != (code.block_length,):
        raise ValueError("LLR vector length must equal the block length")
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    frozen_mask = np.zeros(code.block_length, dtype=np.uint8)
    frozen_mask[list(code.frozen_set)] = 1
    paths, metrics, active, visits = _scl_kernel(llrs, frozen_mask, list_size)
    info_idx = code.info_indices
    chosen = paths[0, info_idx]
    success = code.crc_poly is None
    if code.crc_poly is not None:
        for r in range(active):
            bits = paths[r, info_idx]
            if crc_check(bits, code.crc_poly):
                chosen = bits
                success = True
                break
    payload = chosen[: code.payload_length]
    return DecodeOutcome(info_bits=payload, success=success, node_visits=int(visits))
