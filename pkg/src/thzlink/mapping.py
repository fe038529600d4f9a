"""QPSK modulation and the codeword-to-resource-cell mapping.

Each of the v source streams owns a contiguous block of spatial layers and
spreads its coded bits over (layer, subcarrier, time slot) cells, two bits
per QPSK symbol.  Policy "diverse" advances the subcarrier (and layer) on
every symbol so one codeword samples as many distinct channel qualities as
possible; policy "local" fills one layer and subcarrier completely before
moving on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

BITS_PER_SYMBOL = 2  # QPSK throughout
_SQRT2 = np.sqrt(2.0)

POLICIES = ("diverse", "local")


@dataclass(frozen=True)
class ResourceGrid:
    num_layers: int
    num_subcarriers: int
    num_time_slots: int

    def __post_init__(self):
        if min(self.num_layers, self.num_subcarriers, self.num_time_slots) < 1:
            raise ValueError("grid dimensions must be >= 1")


@dataclass(frozen=True)
class ResourceCell:
    stream_id: int
    layer: int
    subcarrier: int
    time_slot: int


@dataclass(frozen=True)
class CodewordBlock:
    """A coded bit sequence together with its placement on the grid.

    cell_map[i] = (cell, symbol_bit_position) locates coded_bits[i]; position
    0 is the in-phase bit of the cell's QPSK symbol, 1 the quadrature bit.
    """

    coded_bits: np.ndarray
    stream_id: int
    cell_map: tuple

    def __post_init__(self):
        if len(self.cell_map) != len(self.coded_bits):
            raise ValueError("cell_map must cover every coded bit")


def qpsk_modulate(bits) -> np.ndarray:
    """Gray-map pairs of bits to unit-energy QPSK symbols."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2 != 0:
        raise ValueError("bit count must be even for QPSK")
    pairs = bits.reshape(*bits.shape[:-1], -1, 2)
    re = 1.0 - 2.0 * pairs[..., 0]
    im = 1.0 - 2.0 * pairs[..., 1]
    return (re + 1j * im) / _SQRT2


def qpsk_hard_demodulate(symbols):
    """Sign-slice symbols back to bit pairs; zero components slice to bit 0."""
    arr = np.asarray(symbols)
    b0 = (arr.real < 0).astype(np.uint8)
    b1 = (arr.imag < 0).astype(np.uint8)
    out = np.stack([b0, b1], axis=-1)
    return out.reshape(*arr.shape[:-1], -1) if arr.ndim else out.reshape(2)


def layer_partition(num_layers: int, num_streams: int) -> list[range]:
    """Contiguous layer ownership; the last stream absorbs any remainder."""
    if not 1 <= num_streams <= num_layers:
        raise ValueError("need 1 <= num_streams <= num_layers")
    base = num_layers // num_streams
    starts = [s * base for s in range(num_streams)]
    ends = starts[1:] + [num_layers]
    return [range(a, b) for a, b in zip(starts, ends)]


def _stream_cell_indices(num_bits: int, owned: Sequence[int], grid: ResourceGrid,
                         policy: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-bit (layer, subcarrier, slot, bit_position) index arrays."""
    if policy not in POLICIES:
        raise ValueError(f"unknown mapping policy {policy!r}")
    if num_bits % 2 != 0:
        raise ValueError("per-stream bit count must be even for QPSK")
    n_pairs = num_bits // 2
    n_owned = len(owned)
    f = grid.num_subcarriers
    t = grid.num_time_slots
    if n_pairs > n_owned * f * t:
        raise ValueError("codeword exceeds the capacity of its stream's cells")
    p = np.arange(n_pairs)
    owned = np.asarray(owned)
    if policy == "diverse":
        subc = p % f
        layer = owned[(p // f) % n_owned]
        slot = p // (f * n_owned)
    else:  # local
        layer = owned[p // (f * t)]
        rem = p % (f * t)
        subc = rem // t
        slot = rem % t
    layers = np.repeat(layer, 2)
    subcs = np.repeat(subc, 2)
    slots = np.repeat(slot, 2)
    bitpos = np.tile(np.array([0, 1]), n_pairs)
    return layers, subcs, slots, bitpos


def plan_cell_maps(bit_counts: Sequence[int], grid: ResourceGrid, policy: str):
    """Plan per-stream cell maps; data-independent, so plans are reusable.

    Returns one tuple of (ResourceCell, bit_position) entries per stream.
    """
    owned_by_stream = layer_partition(grid.num_layers, len(bit_counts))
    maps = []
    for sid, (num_bits, owned) in enumerate(zip(bit_counts, owned_by_stream)):
        lay, sub, slo, bpos = _stream_cell_indices(num_bits, list(owned), grid, policy)
        maps.append(tuple(
            (ResourceCell(sid, int(l), int(s), int(ts)), int(bp))
            for l, s, ts, bp in zip(lay, sub, slo, bpos)))
    return tuple(maps)


def make_codeword_blocks(coded_bits: Sequence[np.ndarray], grid: ResourceGrid,
                         policy: str = "diverse") -> tuple[CodewordBlock, ...]:
    maps = plan_cell_maps([len(b) for b in coded_bits], grid, policy)
    return tuple(CodewordBlock(np.asarray(b, dtype=np.uint8), sid, m)
                 for sid, (b, m) in enumerate(zip(coded_bits, maps)))


def map_streams(codewords: Sequence[CodewordBlock], grid: ResourceGrid) -> np.ndarray:
    """Place every codeword on the grid; unassigned cells transmit zero.

    Returns the frame as complex symbols of shape
    [num_time_slots, num_subcarriers, num_layers].
    """
    bit_frame = np.zeros((grid.num_time_slots, grid.num_subcarriers, grid.num_layers, 2),
                         dtype=np.uint8)
    seen = set()
    for block in codewords:
        for bit, (cell, bpos) in zip(block.coded_bits, block.cell_map):
            key = (cell.layer, cell.subcarrier, cell.time_slot, bpos)
            if key in seen:
                raise ValueError("cell collision between codewords")
            seen.add(key)
            _check_cell(cell, grid)
            bit_frame[cell.time_slot, cell.subcarrier, cell.layer, bpos] = bit
    re = 1.0 - 2.0 * bit_frame[..., 0]
    im = 1.0 - 2.0 * bit_frame[..., 1]
    return (re + 1j * im) / _SQRT2


def demap_streams(frame: np.ndarray, cell_maps, psi=None):
    """Recover each stream's bits (and PSI tags) from a symbol frame.

    ``psi`` may be a per-layer vector or a [num_subcarriers, num_layers]
    array; when omitted every tag is 1.  Returns a list of
    (bits, psi_tags) pairs in stream order.
    """
    t, f, m = frame.shape
    psi_grid = _psi_grid(psi, f, m)
    out = []
    for cmap in cell_maps:
        bits = np.empty(len(cmap), dtype=np.uint8)
        tags = np.empty(len(cmap))
        for i, (cell, bpos) in enumerate(cmap):
            if not (cell.time_slot < t and cell.subcarrier < f and cell.layer < m):
                raise ValueError("cell map does not match the frame dimensions")
            sym = frame[cell.time_slot, cell.subcarrier, cell.layer]
            comp = sym.real if bpos == 0 else sym.imag
            bits[i] = 1 if comp < 0 else 0
            tags[i] = psi_grid[cell.subcarrier, cell.layer]
        out.append((bits, tags))
    return out


def _psi_grid(psi, num_subcarriers: int, num_layers: int) -> np.ndarray:
    if psi is None:
        return np.ones((num_subcarriers, num_layers))
    psi = np.asarray(psi, dtype=float)
    if psi.shape == (num_layers,):
        return np.broadcast_to(psi, (num_subcarriers, num_layers))
    if psi.shape == (num_subcarriers, num_layers):
        return psi
    raise ValueError("psi must be per-layer or per-(subcarrier, layer)")


def _check_cell(cell: ResourceCell, grid: ResourceGrid) -> None:
    ok = (0 <= cell.layer < grid.num_layers
          and 0 <= cell.subcarrier < grid.num_subcarriers
          and 0 <= cell.time_slot < grid.num_time_slots)
    if not ok:
        raise ValueError("cell outside the resource grid")


def cell_index_arrays(cell_map) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized view of a cell map: (layers, subcarriers, slots, bit_positions)."""
    lay = np.fromiter((c.layer for c, _ in cell_map), dtype=np.int64, count=len(cell_map))
    sub = np.fromiter((c.subcarrier for c, _ in cell_map), dtype=np.int64, count=len(cell_map))
    slo = np.fromiter((c.time_slot for c, _ in cell_map), dtype=np.int64, count=len(cell_map))
    bpos = np.fromiter((bp for _, bp in cell_map), dtype=np.int64, count=len(cell_map))
    return lay, sub, slo, bpos
