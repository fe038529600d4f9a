from .base import DecodeOutcome, ReliabilityVector
from .crc import DEFAULT_CRC_POLY, crc_attach, crc_check, crc_len, crc_remainder
from .grand import DEFAULT_MAX_QUERIES, grand_decode, orbgrand_schedule
from .polar import (PolarCode, design_frozen_set, extract_info_bits,
                    make_polar_code, polar_encode, polar_membership,
                    polar_transform, sc_list_decode)
from .psi import DEFAULT_PSI_LLR_SCALE, llrs_from_psi, psi_reliability
from .turbo import QPP_TABLE, TurboCode, turbo_decode, turbo_encode

__all__ = [
    "DecodeOutcome", "ReliabilityVector",
    "DEFAULT_CRC_POLY", "crc_attach", "crc_check", "crc_len", "crc_remainder",
    "DEFAULT_MAX_QUERIES", "grand_decode", "orbgrand_schedule",
    "PolarCode", "design_frozen_set", "extract_info_bits", "make_polar_code",
    "polar_encode", "polar_membership", "polar_transform", "sc_list_decode",
    "DEFAULT_PSI_LLR_SCALE", "llrs_from_psi", "psi_reliability",
    "QPP_TABLE", "TurboCode", "turbo_decode", "turbo_encode",
]
