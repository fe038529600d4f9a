"""Wideband sub-terahertz MIMO channel stand-in.

Frequency-domain model over a set of uniformly spaced subcarriers: spreading
loss plus exponential molecular absorption, a deterministic line-of-sight
rank-one component from uniform-linear-array steering vectors, and a small
number of random non-line-of-sight rays whose per-ray delays make the band
frequency selective.  Spatial correlation follows the Kronecker model with
exponential correlation matrices on each side.

The model is a documented stand-in calibrated for link-level behaviour
(path-gain scale, Rician structure, frequency selectivity, antenna
correlation), not a ray-traced propagation tool.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import generator

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class ChannelConfig:
    """Static description of one propagation scenario.

    ``delay_spread`` bounds the uniform per-ray excess delays; together with
    the bandwidth it sets how decorrelated the band edges are.
    """

    carrier_frequency: float = 0.3e12
    bandwidth: float = 5e9
    num_subcarriers: int = 16
    num_tx_layers: int = 4
    num_rx_layers: int = 4
    distance: float = 1.0
    absorption_coefficient: float = 0.0033
    num_nlos_rays: int = 8
    rician_k_factor: float = 1.0
    spatial_correlation_rho: float = 0.25
    delay_spread: float = 2e-9

    def __post_init__(self):
        if self.carrier_frequency <= 0 or self.bandwidth <= 0:
            raise ConfigError("carrier_frequency and bandwidth must be positive")
        if self.bandwidth >= 2 * self.carrier_frequency:
            raise ConfigError("bandwidth would place subcarriers at non-positive frequencies")
        if self.num_subcarriers < 1:
            raise ConfigError("num_subcarriers must be >= 1")
        if self.num_tx_layers < 1 or self.num_rx_layers < 1:
            raise ConfigError("layer counts must be >= 1")
        if self.distance <= 0:
            raise ConfigError("distance must be positive")
        if self.absorption_coefficient < 0:
            raise ConfigError("absorption_coefficient must be non-negative")
        if self.num_nlos_rays < 1:
            raise ConfigError("num_nlos_rays must be >= 1")
        if self.rician_k_factor < 0:
            raise ConfigError("rician_k_factor must be non-negative")
        if not 0.0 <= self.spatial_correlation_rho < 1.0:
            raise ConfigError("spatial_correlation_rho must lie in [0, 1)")
        if self.delay_spread < 0:
            raise ConfigError("delay_spread must be non-negative")


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block: per-subcarrier matrices plus the noise variance."""

    matrices: np.ndarray  # complex128 [num_subcarriers, num_rx, num_tx]
    noise_variance: float
    seed: int

    def __post_init__(self):
        self.matrices.setflags(write=False)


def subcarrier_frequencies(cfg: ChannelConfig) -> np.ndarray:
    """Bin-centre frequencies uniformly covering [fc - B/2, fc + B/2]."""
    k = np.arange(cfg.num_subcarriers)
    return cfg.carrier_frequency + cfg.bandwidth * ((k + 0.5) / cfg.num_subcarriers - 0.5)


def path_gain(frequency: float, distance: float, absorption_coefficient: float) -> float:
    """Line-of-sight power gain: spreading loss times molecular absorption.

    gain = (c / (4 pi f d))^2 * exp(-k_abs * d)
    """
    if frequency <= 0 or distance <= 0:
        raise ConfigError("frequency and distance must be positive")
    if absorption_coefficient < 0:
        raise ConfigError("absorption coefficient must be non-negative")
    spreading = (SPEED_OF_LIGHT / (4.0 * np.pi * frequency * distance)) ** 2
    return float(spreading * np.exp(-absorption_coefficient * distance))


def noise_variance_from_snr(snr_db: float, signal_power: float) -> float:
    """Complex noise variance that puts ``signal_power`` at ``snr_db``."""
    if signal_power <= 0:
        raise ConfigError("signal_power must be positive")
    return float(signal_power / 10.0 ** (snr_db / 10.0))


def _steering(angle: float, num_antennas: int) -> np.ndarray:
    # Half-wavelength ULA; unit-magnitude entries.
    return np.exp(1j * np.pi * np.arange(num_antennas) * np.sin(angle))


def _exp_correlation_sqrt(num_antennas: int, rho: float) -> np.ndarray:
    """Hermitian square root of the exponential correlation matrix rho^|i-j|."""
    if rho == 0.0 or num_antennas == 1:
        return np.eye(num_antennas)
    idx = np.arange(num_antennas)
    corr = rho ** np.abs(idx[:, None] - idx[None, :])
    w, v = np.linalg.eigh(corr)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def generate_channel(cfg: ChannelConfig, seed: int, noise_variance: float = 1.0) -> ChannelRealization:
    """Draw one channel realization.

    Same (cfg, seed) gives bit-identical matrices: all randomness comes from
    a Philox stream keyed by ``seed`` and the draw order below is fixed.
    Draw order: LoS angles (rx, tx), then per-ray gains, rx angles, tx
    angles, delays.
    """
    rng = generator(seed)
    m_r, m_t = cfg.num_rx_layers, cfg.num_tx_layers
    freqs = subcarrier_frequencies(cfg)

    theta_r = rng.uniform(-np.pi / 2, np.pi / 2)
    theta_t = rng.uniform(-np.pi / 2, np.pi / 2)
    h_los = np.outer(_steering(theta_r, m_r), _steering(theta_t, m_t).conj())

    n_rays = cfg.num_nlos_rays
    gains = (rng.standard_normal(n_rays) + 1j * rng.standard_normal(n_rays)) / np.sqrt(2.0)
    ray_theta_r = rng.uniform(-np.pi / 2, np.pi / 2, n_rays)
    ray_theta_t = rng.uniform(-np.pi / 2, np.pi / 2, n_rays)
    delays = rng.uniform(0.0, cfg.delay_spread, n_rays) if cfg.delay_spread > 0 else np.zeros(n_rays)

    a_r = np.exp(1j * np.pi * np.arange(m_r)[:, None] * np.sin(ray_theta_r)[None, :])
    a_t = np.exp(1j * np.pi * np.arange(m_t)[:, None] * np.sin(ray_theta_t)[None, :])

    # Per-ray phase rotation across the band; baseband frequency offsets so the
    # centre of the band sees no rotation.
    offsets = freqs - cfg.carrier_frequency
    phases = np.exp(-2j * np.pi * offsets[:, None] * delays[None, :])  # [K, rays]
    weighted = gains[None, :] * phases  # [K, rays]
    h_nlos = np.einsum("rl,kl,tl->krt", a_r, weighted, a_t.conj()) / np.sqrt(n_rays)

    rho = cfg.spatial_correlation_rho
    if rho > 0.0:
        r_rx = _exp_correlation_sqrt(m_r, rho)
        r_tx = _exp_correlation_sqrt(m_t, rho)
        h_nlos = r_rx @ h_nlos @ r_tx

    kappa = cfg.rician_k_factor
    if np.isinf(kappa):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los = np.sqrt(kappa / (kappa + 1.0))
        w_nlos = np.sqrt(1.0 / (kappa + 1.0))

    gains_k = np.array([path_gain(f, cfg.distance, cfg.absorption_coefficient) for f in freqs])
    matrices = np.sqrt(gains_k)[:, None, None] * (w_los * h_los[None, :, :] + w_nlos * h_nlos)
    return ChannelRealization(matrices=np.ascontiguousarray(matrices),
                              noise_variance=float(noise_variance), seed=seed)
