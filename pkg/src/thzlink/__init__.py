"""Link-level toolkit for low-complexity terabit THz MIMO baseband studies.

Modules: channel (wideband THz channel synthesis), mapping (parallel
short-code bit mapping onto space/frequency/time cells), detect (linear,
chase-family and subspace MIMO detectors with per-layer PSI), fec
(CRC, CA-polar with SC-List, GRAND/ORBGRAND, turbo), sim (deterministic
Monte Carlo engine and complexity accounting), cli (presets and result
emission).
"""
from . import channel, cli, detect, fec, mapping, rng, sim
from .channel import ChannelConfig, ChannelRealization, generate_channel
from .detect import (Decomposition, DetectionResult, chase_detect, mmse_detect,
                     psi_from_r, punctured_chase_detect, qrd, ssd_detect, wrd,
                     zf_detect)
from .errors import ConfigError, SingularChannelError
from .fec import (DecodeOutcome, PolarCode, ReliabilityVector, TurboCode,
                  crc_attach, crc_check, grand_decode, llrs_from_psi,
                  make_polar_code, orbgrand_schedule, polar_encode,
                  polar_membership, sc_list_decode, turbo_decode, turbo_encode)
from .mapping import (CodewordBlock, ResourceCell, ResourceGrid, demap_streams,
                      layer_partition, map_streams, plan_cell_maps,
                      qpsk_hard_demodulate, qpsk_modulate)
from .sim import (BlerRecord, BlockOutcome, ComplexityReport, ExperimentConfig,
                  complexity_report, min_storage_bits, run_bler_point,
                  run_block, sweep)

__version__ = "0.1.0"
