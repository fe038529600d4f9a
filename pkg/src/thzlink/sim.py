"""Deterministic Monte Carlo engine for the full link chain.

A block is one channel coherence interval: fresh payloads for every
stream, one channel realization shared by all its symbols, detection
with PSI computed a single time, then per-stream decoding from hard
bits, PSI-weighted pseudo-LLRs, or true soft values.  Every counter a
block reports is an integer, so sweep aggregation is an exact
commutative reduction and results cannot depend on worker count or
scheduling order.

SNR convention: snr_db is receive SNR per coded bit.  The noise
variance for a block is sigma^2 = P_rx / (2 * 10^(snr_db/10)) with
P_rx the realization's mean per-receive-layer channel power, so an
uncoded QPSK bit sees the textbook Gaussian tail error rate at the
grid SNR regardless of path loss.

Seeding: block seed = mix(base_seed, snr_index, block_index); the
channel uses mix(block_seed, 1); payloads are drawn first and then the
noise, both from the block seed's stream.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelConfig, generate_channel
from .detect import prepare_detector
from .errors import ConfigError
from .fec import (DEFAULT_CRC_POLY, DEFAULT_MAX_QUERIES, DEFAULT_PSI_LLR_SCALE,
                  QPP_TABLE, ReliabilityVector, TurboCode, crc_attach,
                  extract_info_bits, grand_decode, llrs_from_psi,
                  make_polar_code, polar_encode, polar_membership,
                  psi_reliability, sc_list_decode, turbo_decode, turbo_encode)
from .mapping import BITS_PER_SYMBOL, POLICIES, ResourceGrid, layer_partition, plan_cell_maps
from .rng import derive_seed, generator

DETECTORS = ("zf", "mmse", "cd", "pcd", "ssd")
DECODERS = ("ca-scl", "grand", "orbgrand", "turbo", "uncoded")
DECODE_INPUTS = ("hard", "psi", "soft")

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated arm.

    code_n / code_k are the per-stream code dimensions (for turbo,
    code_k is the payload and the coded length is 3*code_k + 12; the
    "uncoded" decoder requires code_k = code_n).  When k_includes_crc
    is true, code_k counts the CRC bits of CRC-carrying codes, so the
    transported payload is code_k minus the CRC length.  The CRC
    applies to the polar-family decoders; turbo runs plain.
    """

    channel: ChannelConfig
    detector: str = "zf"
    decoder: str = "ca-scl"
    decode_input: str = "hard"
    code_n: int = 128
    code_k: int = 74
    k_includes_crc: bool = True
    crc_poly: str | None = DEFAULT_CRC_POLY
    list_size: int = 16
    max_queries: int = DEFAULT_MAX_QUERIES
    iterations: int = 8
    psi_llr_scale: float = DEFAULT_PSI_LLR_SCALE
    num_streams: int = 1
    mapping_policy: str = "diverse"
    ssd_groups: tuple | None = None
    snr_grid_db: tuple = (0.0,)
    min_block_errors: int = 100
    max_blocks: int = 1_000_000
    round_blocks: int = 256
    base_seed: int = 0

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if self.decode_input not in DECODE_INPUTS:
            raise ConfigError(f"unknown decode_input {self.decode_input!r}")
        if self.mapping_policy not in POLICIES:
            raise ConfigError(f"unknown mapping_policy {self.mapping_policy!r}")
        if self.decode_input == "soft" and self.detector in ("cd", "pcd"):
            raise ConfigError("cd/pcd detectors emit hard decisions and PSI only")
        if self.decoder == "uncoded":
            if self.decode_input != "hard":
                raise ConfigError("the uncoded reference supports hard decisions only")
            if self.code_k != self.code_n:
                raise ConfigError("uncoded streams need code_k = code_n")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ConfigError("snr_grid_db must be nonempty")
        object.__setattr__(self, "snr_grid_db", tuple(sorted(grid)))
        if self.min_block_errors < 1:
            raise ConfigError("min_block_errors must be >= 1")
        if self.max_blocks < 1 or self.round_blocks < 1:
            raise ConfigError("block budgets must be >= 1")
        if self.list_size < 1 or self.max_queries < 1 or self.iterations < 1:
            raise ConfigError("decoder budgets must be >= 1")
        if self.psi_llr_scale <= 0:
            raise ConfigError("psi_llr_scale must be positive")
        if not 1 <= self.num_streams <= self.channel.num_tx_layers:
            raise ConfigError("num_streams must be in [1, num_tx_layers]")
        if self.channel.num_rx_layers < self.channel.num_tx_layers:
            raise ConfigError("detection assumes num_rx_layers >= num_tx_layers")
        if self.ssd_groups is not None:
            groups = tuple(tuple(int(i) for i in g) for g in self.ssd_groups)
            object.__setattr__(self, "ssd_groups", groups)
            flat = sorted(i for g in groups for i in g)
            if flat != list(range(self.channel.num_tx_layers)):
                raise ConfigError("ssd_groups must partition the transmit layers")

    @property
    def snr_index_of(self):
        return {s: i for i, s in enumerate(self.snr_grid_db)}


@dataclass(frozen=True)
class BlockOutcome:
    """Integer counters from one simulated block."""

    is_error: bool
    bit_errors: int
    info_bits: int
    op_count: int
    queries: int
    node_visits: int
    abandoned_streams: int
    max_stream_cost: int
    psi_evaluations: int
    num_streams: int


@dataclass(frozen=True)
class BlerRecord:
    snr_db: float
    blocks: int
    block_errors: int
    bler: float
    mean_queries: float
    mean_op_count: float
    abandonment_rate: float
    wall_seed: int


@dataclass(frozen=True)
class ComplexityReport:
    """Measured cost comparison between a baseline and a variant arm.

    detection_ratio is the per-channel-use detector MAC ratio, the
    decoding_ratio the per-block decoder cost ratio, and
    stream_division the critical-path decoder cost per information bit
    (max over concurrent streams) of the variant relative to the
    baseline.
    """

    axis: str
    snr_db: float
    blocks: int
    detector_macs: tuple
    decoder_cost: tuple
    per_stream_cost: tuple
    detection_ratio: float
    decoding_ratio: float
    stream_division: float


def min_storage_bits(throughput_bits_per_s: float, latency_s: float) -> float:
    """Lower bound on in-flight physical-layer storage: throughput x latency."""
    if throughput_bits_per_s <= 0 or latency_s <= 0:
        raise ValueError("throughput and latency must be positive")
    return throughput_bits_per_s * latency_s


def default_ssd_groups(num_layers: int, group_size: int = 2) -> tuple:
    """Contiguous groups; the last one absorbs any remainder."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    edges = list(range(0, num_layers, group_size))
    groups = [tuple(range(a, min(a + group_size, num_layers))) for a in edges]
    if len(groups) > 1 and len(groups[-1]) < group_size:
        groups[-2] = groups[-2] + groups[-1]
        groups.pop()
    return tuple(groups)


class _Compiled:
    """Everything derivable from the config alone: codes, cell maps,
    decoder closures.  Data independent, reused across all blocks."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        ch = cfg.channel
        self.f = ch.num_subcarriers
        self.m_t = ch.num_tx_layers
        self.m_r = ch.num_rx_layers
        v = cfg.num_streams
        try:
            self.partition = layer_partition(self.m_t, v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self._build_codec()
        symbols_per_stream = self.coded_len // BITS_PER_SYMBOL
        min_owned = min(len(r) for r in self.partition)
        self.t = -(-symbols_per_stream // (min_owned * self.f))
        grid = ResourceGrid(self.m_t, self.f, self.t)
        try:
            maps = plan_cell_maps([self.coded_len] * v, grid, cfg.mapping_policy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.grid = grid
        self.stream_cells = []
        for cmap in maps:
            lay = np.fromiter((c.layer for c, _ in cmap), np.int64, len(cmap))
            sub = np.fromiter((c.subcarrier for c, _ in cmap), np.int64, len(cmap))
            slo = np.fromiter((c.time_slot for c, _ in cmap), np.int64, len(cmap))
            bpos = np.fromiter((bp for _, bp in cmap), np.int64, len(cmap))
            self.stream_cells.append((lay, sub, slo, bpos))
        if cfg.detector == "ssd":
            self.groups = cfg.ssd_groups or default_ssd_groups(self.m_t)
        else:
            self.groups = None

    def _build_codec(self):
        cfg = self.cfg
        scale = cfg.psi_llr_scale
        if cfg.decoder == "uncoded":
            self.payload_len = cfg.code_n
            self.coded_len = cfg.code_n
            self.encode = lambda p: p
            self.decode = lambda bits, tags, soft: (bits, True, 0, 0, False)
            return
        if cfg.decoder == "turbo":
            if cfg.code_k not in QPP_TABLE:
                raise ConfigError(
                    f"turbo payload {cfg.code_k} has no configured interleaver "
                    f"(choose from {sorted(QPP_TABLE)})")
            code = TurboCode(cfg.code_k)
            self.payload_len = cfg.code_k
            self.coded_len = code.coded_length

            def encode(p):
                return turbo_encode(p, code)

            def decode(bits, tags, soft):
                llr = soft if soft is not None else llrs_from_psi(bits, tags, scale)
                out = turbo_decode(llr, code, cfg.iterations)
                return out.info_bits, out.success, 0, out.node_visits, False

            self.encode = encode
            self.decode = decode
            return
        # polar family: ca-scl, grand, orbgrand
        n, k = cfg.code_n, cfg.code_k
        if n < 2 or n & (n - 1):
            raise ConfigError("code_n must be a power of two")
        crc = cfg.crc_poly
        k_total = k if cfg.k_includes_crc or crc is None else k + len(crc) - 1
        if not 0 < k_total < n:
            raise ConfigError("need 0 < info bits < code_n after CRC accounting")
        try:
            code = make_polar_code(n, k_total, crc)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.payload_len = code.payload_length
        self.coded_len = n

        def encode(p):
            word = crc_attach(p, crc) if crc is not None else p
            return polar_encode(word, code)

        if cfg.decoder == "ca-scl":

            def decode(bits, tags, soft):
                llr = soft if soft is not None else llrs_from_psi(bits, tags, scale)
                out = sc_list_decode(llr, code, cfg.list_size)
                return out.info_bits, out.success, 0, out.node_visits, False

        else:
            if crc is None:
                raise ConfigError("grand decoding needs the joint CRC membership")
            membership = polar_membership(code)
            force_logistic = cfg.decoder == "orbgrand"

            def extract(word):
                return extract_info_bits(code, word)

            def decode(bits, tags, soft):
                if soft is not None:
                    rel = ReliabilityVector(np.abs(soft), "soft")
                elif cfg.decode_input == "psi":
                    rel = (ReliabilityVector(tags, "psi") if force_logistic
                           else psi_reliability(tags))
                elif force_logistic:
                    rel = ReliabilityVector(np.ones(bits.size), "psi")
                else:
                    rel = ReliabilityVector.hard_uniform(bits.size)
                out = grand_decode(bits, rel, membership, cfg.max_queries, extract)
                return out.info_bits, out.success, out.queries, 0, out.abandoned

        self.encode = encode
        self.decode = decode

    def run(self, snr_db: float, snr_index: int, block_index: int) -> BlockOutcome:
        cfg = self.cfg
        f, m_t, m_r, t = self.f, self.m_t, self.m_r, self.t
        block_seed = derive_seed(cfg.base_seed, snr_index, block_index)
        rng = generator(block_seed)
        payloads = [rng.integers(0, 2, size=self.payload_len, dtype=np.uint8)
                    for _ in range(cfg.num_streams)]
        coded = [self.encode(p) for p in payloads]
        bit_frame = np.zeros((t, f, m_t, 2), dtype=np.uint8)
        for s, (lay, sub, slo, bpos) in enumerate(self.stream_cells):
            bit_frame[slo, sub, lay, bpos] = coded[s]
        x = ((1.0 - 2.0 * bit_frame[..., 0]) + 1j * (1.0 - 2.0 * bit_frame[..., 1])) / _SQRT2
        x = x.transpose(1, 2, 0)  # [F, M_t, T]
        realization = generate_channel(cfg.channel, derive_seed(block_seed, 1))
        h = realization.matrices
        p_rx = float(np.mean(np.abs(h) ** 2) * m_t)  # mean ||H_k||_F^2 / M_r
        sigma2 = p_rx / (2.0 * 10.0 ** (snr_db / 10.0))
        noise = (rng.standard_normal((f, m_r, t))
                 + 1j * rng.standard_normal((f, m_r, t))) * np.sqrt(sigma2 / 2.0)
        y = np.einsum("frm,fmt->frt", h, x) + noise
        state = prepare_detector(cfg.detector, h, sigma2, ssd_groups=self.groups)
        want_soft = cfg.decode_input == "soft"
        symbols, llrs = state.detect(y, want_soft)
        hard = np.empty((f, m_t, t, 2), dtype=np.uint8)
        hard[..., 0] = symbols.real < 0
        hard[..., 1] = symbols.imag < 0
        psi = state.psi  # [F, M_t]
        use_psi = cfg.decode_input == "psi"
        is_error = False
        bit_errors = 0
        queries = visits = abandoned = max_cost = 0
        for s, (lay, sub, slo, bpos) in enumerate(self.stream_cells):
            bits_s = hard[sub, lay, slo, bpos]
            tags_s = psi[sub, lay] if use_psi else np.ones(bits_s.size)
            soft_s = llrs[sub, lay, slo, bpos] if want_soft else None
            payload_hat, _, q, nv, ab = self.decode(bits_s, tags_s, soft_s)
            mism = int(np.count_nonzero(payload_hat != payloads[s]))
            bit_errors += mism
            is_error = is_error or mism > 0
            queries += q
            visits += nv
            abandoned += int(ab)
            max_cost = max(max_cost, q + nv)
        return BlockOutcome(
            is_error=is_error,
            bit_errors=bit_errors,
            info_bits=self.payload_len * cfg.num_streams,
            op_count=state.op_per_use * f * t,
            queries=queries,
            node_visits=visits,
            abandoned_streams=abandoned,
            max_stream_cost=max_cost,
            psi_evaluations=f,
            num_streams=cfg.num_streams)


@lru_cache(maxsize=8)
def _compile(cfg: ExperimentConfig) -> _Compiled:
    return _Compiled(cfg)


def validate_experiment(cfg: ExperimentConfig) -> None:
    """Raise ConfigError on any inconsistency a sweep would hit."""
    _compile(cfg)


def _snr_index(cfg: ExperimentConfig, snr_db: float) -> int:
    lookup = cfg.snr_index_of
    key = float(snr_db)
    if key in lookup:
        return lookup[key]
    # off-grid probes stay deterministic: seed from the value's bit pattern
    return int(np.float64(key).view(np.uint64))


def run_block(cfg: ExperimentConfig, snr_db: float, block_index: int) -> BlockOutcome:
    return _compile(cfg).run(float(snr_db), _snr_index(cfg, snr_db), block_index)


_TALLY_FIELDS = ("blocks", "block_errors", "bit_errors", "info_bits", "op_count",
                 "queries", "node_visits", "abandoned_streams", "max_stream_cost",
                 "psi_evaluations")


def _span_tally(cfg: ExperimentConfig, snr_db: float, snr_index: int,
                start: int, count: int) -> np.ndarray:
    compiled = _compile(cfg)
    tally = np.zeros(len(_TALLY_FIELDS), dtype=np.int64)
    for b in range(start, start + count):
        o = compiled.run(snr_db, snr_index, b)
        tally += (1, o.is_error, o.bit_errors, o.info_bits, o.op_count,
                  o.queries, o.node_visits, o.abandoned_streams,
                  o.max_stream_cost, o.psi_evaluations)
    return tally


def _split_span(start: int, count: int, parts: int):
    base, rem = divmod(count, parts)
    offset = start
    for i in range(parts):
        size = base + (1 if i < rem else 0)
        if size:
            yield offset, size
        offset += size


def run_bler_point(cfg: ExperimentConfig, snr_db: float, workers: int = 1) -> BlerRecord:
    """Simulate one SNR point under the stop rule.

    Blocks run in fixed-size rounds; the stop rule is evaluated only on
    round boundaries, so the set of simulated block indices (and with
    it every counter) is identical for any worker count.
    """
    compiled = _compile(cfg)
    snr_db = float(snr_db)
    snr_index = _snr_index(cfg, snr_db)
    tally = np.zeros(len(_TALLY_FIELDS), dtype=np.int64)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        done = 0
        while True:
            this_round = min(cfg.round_blocks, cfg.max_blocks - done)
            if this_round <= 0:
                break
            if pool is None:
                tally += _span_tally(cfg, snr_db, snr_index, done, this_round)
            else:
                futs = [pool.submit(_span_tally, cfg, snr_db, snr_index, a, c)
                        for a, c in _split_span(done, this_round, workers)]
                for fut in futs:
                    tally += fut.result()
            done += this_round
            if tally[1] >= cfg.min_block_errors or done >= cfg.max_blocks:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    counts = dict(zip(_TALLY_FIELDS, (int(x) for x in tally)))
    blocks = counts["blocks"]
    return BlerRecord(
        snr_db=snr_db,
        blocks=blocks,
        block_errors=counts["block_errors"],
        bler=counts["block_errors"] / blocks,
        mean_queries=counts["queries"] / blocks,
        mean_op_count=counts["op_count"] / blocks,
        abandonment_rate=counts["abandoned_streams"] / (blocks * cfg.num_streams),
        wall_seed=derive_seed(cfg.base_seed, snr_index))


def sweep(cfg: ExperimentConfig, workers: int = 1) -> list[BlerRecord]:
    """One BlerRecord per grid SNR, ascending."""
    validate_experiment(cfg)
    return [run_bler_point(cfg, s, workers) for s in cfg.snr_grid_db]


_COMPARISON_AXES = (
    (frozenset(), "self"),
    (frozenset({"detector"}), "detection"),
    (frozenset({"decode_input"}), "decoding"),
)


def _comparison_axis(baseline: ExperimentConfig, variant: ExperimentConfig) -> str:
    diff = {f.name for f in dataclasses.fields(ExperimentConfig)
            if getattr(baseline, f.name) != getattr(variant, f.name)}
    for fields, name in _COMPARISON_AXES:
        if diff == fields:
            return name
    if "num_streams" in diff and diff <= {"num_streams", "code_n", "code_k"}:
        return "parallelism"
    raise ConfigError(f"configs differ on unsupported axes: {sorted(diff)}")


def _measure(cfg: ExperimentConfig, snr_db: float, blocks: int):
    compiled = _compile(cfg)
    tally = _span_tally(cfg, snr_db, _snr_index(cfg, snr_db), 0, blocks)
    counts = dict(zip(_TALLY_FIELDS, (int(x) for x in tally)))
    uses = blocks * compiled.f * compiled.t
    macs = counts["op_count"] / uses
    cost = (counts["queries"] + counts["node_visits"]) / blocks
    stream_cost = counts["max_stream_cost"] / counts["info_bits"]
    return macs, cost, stream_cost


def _ratio(variant: float, baseline: float) -> float:
    if baseline == 0:
        return 1.0 if variant == 0 else float("inf")
    return variant / baseline


def complexity_report(baseline: ExperimentConfig, variant: ExperimentConfig,
                      snr_db: float, blocks: int) -> ComplexityReport:
    """Counter-based cost ratios between two arms differing on one axis."""
    if blocks < 1:
        raise ConfigError("blocks must be >= 1")
    axis = _comparison_axis(baseline, variant)
    validate_experiment(baseline)
    validate_experiment(variant)
    b_macs, b_cost, b_stream = _measure(baseline, snr_db, blocks)
    v_macs, v_cost, v_stream = _measure(variant, snr_db, blocks)
    return ComplexityReport(
        axis=axis,
        snr_db=float(snr_db),
        blocks=blocks,
        detector_macs=(b_macs, v_macs),
        decoder_cost=(b_cost, v_cost),
        per_stream_cost=(b_stream, v_stream),
        detection_ratio=_ratio(v_macs, b_macs),
        decoding_ratio=_ratio(v_cost, b_cost),
        stream_division=_ratio(v_stream, b_stream))
