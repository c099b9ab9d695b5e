"""
Synthetic NOMA uplink transmissions

Each receive row follows r(t) = Σ_k √p_k · b_k(t) · h_k + n(t) with i.i.d.
Rayleigh signatures h_k, a 3 dB-per-user power profile, an optional
memoryless cubic receiver distortion and complex AWGN scaled to a target SNR.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from config.constants import (
    DEFAULT_NUM_USERS, DEFAULT_NUM_ANTENNAS, DEFAULT_TRAIN_SYMBOLS,
    DEFAULT_DATA_SYMBOLS, DEFAULT_POWER_STEP_DB, DEFAULT_SNR_DB, DEFAULT_SEED
)
from core.errors import ConfigError, DimensionError
from utils.rng import substream

logger = logging.getLogger(__name__)

# Exact enumeration of 4^K symbol combinations stays below ~1M rows
MAX_ENUMERATED_USERS = 10


class Modulation(str, Enum):
    QPSK = "QPSK"


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Parameters of one simulated transmission

    Attributes:
        num_users: K, number of single-antenna transmitters
        num_antennas: M, number of receive antennas
        train_symbols: N_T, pilot symbols per user
        data_symbols: N_D, data symbols per user
        power_step_db: Power drop between consecutive users
        snr_db: Total received signal power over noise power, inf for no noise
        rx_nonlinearity_gain: γ of the cubic distortion u + γ·u·|u|², 0 disables
        modulation: Constellation of all users
        seed: Master seed of every random substream
    """
    num_users: int = DEFAULT_NUM_USERS
    num_antennas: int = DEFAULT_NUM_ANTENNAS
    train_symbols: int = DEFAULT_TRAIN_SYMBOLS
    data_symbols: int = DEFAULT_DATA_SYMBOLS
    power_step_db: float = DEFAULT_POWER_STEP_DB
    snr_db: float = DEFAULT_SNR_DB
    rx_nonlinearity_gain: float = 0.0
    modulation: Modulation = Modulation.QPSK
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        for name in ("num_users", "num_antennas", "train_symbols", "data_symbols"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.train_symbols < 2 * self.num_antennas:
            raise ConfigError(
                f"train_symbols={self.train_symbols} must be at least 2*num_antennas="
                f"{2 * self.num_antennas} for an over-determined least-squares fit"
            )
        if not self.power_step_db >= 0.0:
            raise ConfigError(f"power_step_db must be >= 0, got {self.power_step_db}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ConfigError(f"snr_db must be a real number or inf, got {self.snr_db}")
        if not self.rx_nonlinearity_gain >= 0.0:
            raise ConfigError(f"rx_nonlinearity_gain must be >= 0, got {self.rx_nonlinearity_gain}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        # Accept plain strings from config files
        object.__setattr__(self, "modulation", Modulation(self.modulation))


@dataclass
class TransmissionRecord:
    """
    One simulated transmission, training and detection phase

    Attributes:
        channel: H, M×K, column k is h_k
        powers: p, length K, p_1 = 1
        train_rx: X_T, N_T×M
        train_symbols: Y_T, N_T×K
        data_rx: X_D, N_D×M
        data_symbols: Y_D, N_D×K
        noise_power: σ² per complex receive sample
    """
    channel: np.ndarray
    powers: np.ndarray
    train_rx: np.ndarray
    train_symbols: np.ndarray
    data_rx: np.ndarray
    data_symbols: np.ndarray
    noise_power: float = 0.0
    modulation: Modulation = field(default=Modulation.QPSK)

    @property
    def num_users(self) -> int:
        return self.channel.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.channel.shape[0]

    def validate(self) -> None:
        """Check that all matrix dimensions agree with the channel"""
        M, K = self.channel.shape
        expected = {
            "powers": (K,),
            "train_rx": (self.train_rx.shape[0], M),
            "train_symbols": (self.train_rx.shape[0], K),
            "data_rx": (self.data_rx.shape[0], M),
            "data_symbols": (self.data_rx.shape[0], K),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionError(f"{name} has shape {actual}, expected {shape}")


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """
    Gray-map bit pairs onto unit-energy QPSK points

    (b0, b1) -> ((1 - 2·b0) + i(1 - 2·b1)) / √2

    Args:
        bits: Integer array whose last axis has length 2

    Returns:
        np.ndarray: Complex array with the last axis removed
    """
    bits = np.asarray(bits)
    if bits.shape[-1] != 2:
        raise DimensionError(f"QPSK mapping needs bit pairs, got last axis {bits.shape[-1]}")
    real = 1.0 - 2.0 * bits[..., 0]
    imag = 1.0 - 2.0 * bits[..., 1]
    return (real + 1j * imag) / math.sqrt(2.0)


def constellation(modulation: Modulation = Modulation.QPSK) -> np.ndarray:
    """Return the constellation points ordered by their bit label"""
    modulation = Modulation(modulation)
    labels = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    return qpsk_map(labels)


def gen_symbols(
    num_users: int,
    num_symbols: int,
    modulation: Modulation,
    rng: np.random.Generator
) -> np.ndarray:
    """
    Draw uniformly distributed pseudo-random symbols

    Args:
        num_users: K
        num_symbols: N
        modulation: Constellation to draw from
        rng: Seeded generator

    Returns:
        np.ndarray: Complex N×K symbol matrix
    """
    if num_users < 1 or num_symbols < 1:
        raise DimensionError(f"Symbol matrix needs K, N >= 1, got K={num_users}, N={num_symbols}")
    Modulation(modulation)
    bits = rng.integers(0, 2, size=(num_symbols, num_users, 2))
    return qpsk_map(bits)


def gen_channel(num_users: int, num_antennas: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw i.i.d. CN(0, 1) channel signatures

    Returns:
        np.ndarray: Complex M×K matrix, column k is h_k
    """
    if num_users < 1 or num_antennas < 1:
        raise DimensionError(f"Channel needs K, M >= 1, got K={num_users}, M={num_antennas}")
    shape = (num_antennas, num_users)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def power_profile(num_users: int, power_step_db: float) -> np.ndarray:
    """p_k = 10^(-(k-1)·step/10), so p_1 = 1 and each user is step dB weaker"""
    k = np.arange(num_users, dtype=np.float64)
    return 10.0 ** (-k * power_step_db / 10.0)


def apply_rx_nonlinearity(samples: np.ndarray, gain: float) -> np.ndarray:
    """Memoryless cubic distortion u + γ·u·|u|²"""
    if gain == 0.0:
        return samples
    return samples + gain * samples * np.abs(samples) ** 2


def superimpose(
    symbols: np.ndarray,
    channel: np.ndarray,
    powers: np.ndarray,
    gain: float = 0.0
) -> np.ndarray:
    """
    Noiseless receive rows r(t) = Σ_k √p_k·b_k(t)·h_k, then the cubic distortion

    Args:
        symbols: Complex N×K symbol matrix
        channel: Complex M×K channel matrix
        powers: Length-K power profile
        gain: γ of the receiver distortion

    Returns:
        np.ndarray: Complex N×M receive matrix
    """
    symbols = np.atleast_2d(symbols)
    if symbols.shape[1] != channel.shape[1] or powers.shape != (channel.shape[1],):
        raise DimensionError(
            f"Symbols {symbols.shape}, channel {channel.shape} and powers {powers.shape} disagree on K"
        )
    mixing = np.sqrt(powers)[:, None] * channel.T
    return apply_rx_nonlinearity(symbols @ mixing, gain)


def expected_signal_power(
    channel: np.ndarray,
    powers: np.ndarray,
    gain: float,
    modulation: Modulation = Modulation.QPSK
) -> Optional[float]:
    """
    Expected received signal power per row, summed over antennas

    For γ = 0 this is Σ_k p_k·‖h_k‖² (unit symbol energy). For γ > 0 the
    average runs over every equiprobable combination of user symbols, which
    is exact for up to MAX_ENUMERATED_USERS users.

    Returns:
        Optional[float]: Expected power, or None when enumeration is too large
    """
    if gain == 0.0:
        return float(np.sum(powers * np.sum(np.abs(channel) ** 2, axis=0)))

    num_users = channel.shape[1]
    if num_users > MAX_ENUMERATED_USERS:
        return None

    points = constellation(modulation)
    labels = np.indices((points.size,) * num_users).reshape(num_users, -1).T
    combos = points[labels]
    distorted = superimpose(combos, channel, powers, gain)
    return float(np.mean(np.sum(np.abs(distorted) ** 2, axis=1)))


def synthesize(
    cfg: ScenarioConfig,
    trial: int = 0,
    fresh_channel: bool = True
) -> TransmissionRecord:
    """
    Simulate one transmission with a training and a detection phase

    Args:
        cfg: Scenario parameters
        trial: Trial index; selects the noise (and channel) realization
        fresh_channel: Draw a new channel per trial instead of one per seed

    Returns:
        TransmissionRecord: Channel, powers, receive matrices and symbols
    """
    K, M = cfg.num_users, cfg.num_antennas
    N_T, N_D = cfg.train_symbols, cfg.data_symbols

    # Step 1: Symbols; independent of the trial index
    train_symbols = gen_symbols(K, N_T, cfg.modulation, substream(cfg.seed, "symbols", 0))
    data_symbols = gen_symbols(K, N_D, cfg.modulation, substream(cfg.seed, "symbols", 1))

    # Step 2: Channel and power profile
    channel_keys = (trial,) if fresh_channel else ()
    channel = gen_channel(K, M, substream(cfg.seed, "channel", *channel_keys))
    powers = power_profile(K, cfg.power_step_db)

    # Step 3: Noiseless receive rows X = B·diag(√p)·Hᵀ, then distortion
    train_clean = superimpose(train_symbols, channel, powers, cfg.rx_nonlinearity_gain)
    data_clean = superimpose(data_symbols, channel, powers, cfg.rx_nonlinearity_gain)

    # Step 4: AWGN scaled to the requested SNR
    noise_power = 0.0
    if math.isfinite(cfg.snr_db):
        signal_power = expected_signal_power(channel, powers, cfg.rx_nonlinearity_gain, cfg.modulation)
        if signal_power is None:
            clean = np.vstack([train_clean, data_clean])
            signal_power = float(np.mean(np.sum(np.abs(clean) ** 2, axis=1)))
        noise_power = signal_power / (M * 10.0 ** (cfg.snr_db / 10.0))

    train_rx, data_rx = train_clean, data_clean
    if noise_power > 0.0:
        rng = substream(cfg.seed, "noise", trial)
        scale = math.sqrt(noise_power / 2.0)
        train_rx = train_clean + scale * (rng.standard_normal((N_T, M)) + 1j * rng.standard_normal((N_T, M)))
        data_rx = data_clean + scale * (rng.standard_normal((N_D, M)) + 1j * rng.standard_normal((N_D, M)))

    logger.debug(
        "Synthesized K=%d M=%d N_T=%d N_D=%d snr=%s dB sigma2=%.3e trial=%d",
        K, M, N_T, N_D, cfg.snr_db, noise_power, trial
    )

    return TransmissionRecord(
        channel=channel,
        powers=powers,
        train_rx=train_rx,
        train_symbols=train_symbols,
        data_rx=data_rx,
        data_symbols=data_symbols,
        noise_power=noise_power,
        modulation=cfg.modulation,
    )
