"""Guessing random additive noise decoding with pluggable membership.

Patterns are generated in rank space (rank 1 = least reliable position)
and translated to bit positions per call, so one cached schedule serves
every channel realization of a given length.  Two orders exist: plain
Hamming weight for hard-uniform reliabilities, and the logistic-weight
order (nondecreasing sum of flipped ranks, lexicographic on the rank
set within equal weight) when a genuine reliability ordering is
available.
"""
from __future__ import annotations

import numpy as np

from .base import DecodeOutcome, ReliabilityVector, as_bits

DEFAULT_MAX_QUERIES = 1 << 20
_BATCH = 4096

# (length, kind) -> {"chunks": [uint8 [B, length] rank-space flip masks],
#                    "gen": exhausted-able iterator, "done": bool}
_PATTERN_CACHE: dict = {}


def _distinct_part_sets(total: int, smallest: int, largest: int):
    """Rank sets with the given sum, ascending lexicographic order."""
    if total == 0:
        yield ()
        return
    for first in range(smallest, largest + 1):
        if first > total:
            break
        for rest in _distinct_part_sets(total - first, first + 1, largest):
            yield (first,) + rest


def _logistic_rank_sets(length: int):
    weight = 0
    cap = length * (length + 1) // 2
    while weight <= cap:
        yield from _distinct_part_sets(weight, 1, length)
        weight += 1


def _hamming_rank_sets(length: int):
    from itertools import combinations

    for weight in range(length + 1):
        yield from combinations(range(1, length + 1), weight)


def _schedule_chunks(length: int, kind: str):
    state = _PATTERN_CACHE.get((length, kind))
    if state is None:
        gen = (_logistic_rank_sets if kind == "logistic" else _hamming_rank_sets)(length)
        state = {"chunks": [], "gen": gen, "done": False}
        _PATTERN_CACHE[(length, kind)] = state
    return state


def _ensure_chunk(state, index: int, length: int) -> np.ndarray | None:
    """Rank-space flip masks for one batch, cached bit-packed."""
    chunks = state["chunks"]
    while len(chunks) <= index and not state["done"]:
        rows = np.zeros((_BATCH, length), dtype=np.uint8)
        count = 0
        for ranks in state["gen"]:
            for r in ranks:
                rows[count, r - 1] = 1
            count += 1
            if count == _BATCH:
                break
        if count < _BATCH:
            state["done"] = True
            rows = rows[:count]
        if count:
            chunks.append(np.packbits(rows, axis=1))
    if index >= len(chunks):
        return None
    return np.unpackbits(chunks[index], axis=1, count=length)


def orbgrand_schedule(reliability):
    """Lazy stream of error patterns as sorted position tuples.

    Positions are ranked by ascending reliability (stable on ties);
    patterns come out in nondecreasing logistic weight, the empty pattern
    first.
    """
    values = np.asarray(
        reliability.values if isinstance(reliability, ReliabilityVector) else reliability,
        dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("reliabilities must be finite")
    position_of_rank = np.argsort(values, kind="stable")
    for ranks in _logistic_rank_sets(values.size):
        yield tuple(sorted(int(position_of_rank[r - 1]) for r in ranks))


def grand_decode(hard_bits, reliability: ReliabilityVector, membership,
                 max_queries: int = DEFAULT_MAX_QUERIES, extract=None) -> DecodeOutcome:
    """Flip rank-ordered noise patterns onto hard_bits until membership passes.

    queries counts tested words, the unmodified word being query 1.  On
    an exhausted budget the outcome is abandoned and carries the input
    word's payload unchanged.  ``extract`` maps a codeword-domain word to
    info bits; by default the word itself is returned.
    """
    if max_queries < 1:
        raise ValueError("max_queries must be >= 1")
    hard = as_bits(hard_bits)
    n = hard.size
    if reliability.values.size != n:
        raise ValueError("reliability length must match the word length")
    kind = "hamming" if reliability.kind == "hard-uniform" else "logistic"
    position_of_rank = np.argsort(reliability.values, kind="stable")
    state = _schedule_chunks(n, kind)
    tested = 0
    chunk_index = 0
    while tested < max_queries:
        rank_rows = _ensure_chunk(state, chunk_index, n)
        if rank_rows is None:
            break
        chunk_index += 1
        rows = rank_rows[: max_queries - tested]
        flips = np.zeros_like(rows)
        flips[:, position_of_rank] = rows
        words = hard[None, :] ^ flips
        verdict = np.asarray(membership(words), dtype=bool)
        hits = np.nonzero(verdict)[0]
        if hits.size:
            first = int(hits[0])
            word = words[first]
            info = word if extract is None else extract(word)
            return DecodeOutcome(info_bits=info, success=True,
                                 queries=tested + first + 1)
        tested += len(rows)
    info = hard if extract is None else extract(hard)
    return DecodeOutcome(info_bits=info, success=False, queries=tested,
                         abandoned=True)
