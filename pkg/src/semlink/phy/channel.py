"""Tapped-delay-line fading channels, AWGN and the binary symmetric channel."""

from dataclasses import dataclass

import numpy as np

from .ofdm import OfdmConfig

SUI5_DELAYS = (0, 4, 10)
SUI5_POWERS_DB = (0.0, -5.0, -10.0)


@dataclass(frozen=True)
class ChannelRealization:
    """Sparse impulse response ``sum_t g_t delta[n - d_t]``.

    ``tap_powers`` holds the expected (normalised) power of each tap and is
    what the MMSE estimator uses as its correlation model.
    """
    tap_delays: np.ndarray
    tap_gains: np.ndarray
    n_sub: int
    tap_powers: np.ndarray = None

    def __post_init__(self):
        d = np.asarray(self.tap_delays, dtype=np.int64)
        g = np.asarray(self.tap_gains, dtype=complex)
        if d.shape != g.shape:
            raise ValueError("tap_delays and tap_gains must have the same length")
        object.__setattr__(self, "tap_delays", d)
        object.__setattr__(self, "tap_gains", g)
        p = np.abs(g) ** 2 if self.tap_powers is None else np.asarray(self.tap_powers, float)
        object.__setattr__(self, "tap_powers", p)

    @classmethod
    def identity(cls, n_sub: int) -> "ChannelRealization":
        return cls(np.array([0]), np.array([1.0 + 0j]), n_sub, np.array([1.0]))

    @property
    def max_delay(self) -> int:
        return int(self.tap_delays.max())

    @property
    def impulse_response(self) -> np.ndarray:
        h = np.zeros(self.max_delay + 1, dtype=complex)
        np.add.at(h, self.tap_delays, self.tap_gains)
        return h

    @property
    def freq_response(self) -> np.ndarray:
        k = np.arange(self.n_sub)[:, None]
        phase = np.exp(-2j * np.pi * k * self.tap_delays[None, :] / self.n_sub)
        return phase @ self.tap_gains


@dataclass(frozen=True)
class NoiseConfig:
    snr_db: float = float("inf")
    seed: int = 0


def _rayleigh_taps(delays, powers_db, seed, cfg: OfdmConfig, normalize=True):
    delays = np.asarray(delays, dtype=np.int64)
    if delays.max() >= cfg.cp_len:
        raise ValueError(f"max tap delay {delays.max()} must be below cp_len {cfg.cp_len}")
    p = 10.0 ** (np.asarray(powers_db, dtype=float) / 10.0)
    if normalize:
        p = p / p.sum()
    rng = np.random.default_rng(seed)
    g = np.sqrt(p / 2) * (rng.standard_normal(p.size) + 1j * rng.standard_normal(p.size))
    return ChannelRealization(delays, g, cfg.n_sub, p)


def make_sui5(seed, cfg: OfdmConfig) -> ChannelRealization:
    """SUI-5 realisation: Rayleigh taps at delays 0/4/10 with 0/-5/-10 dB."""
    return _rayleigh_taps(SUI5_DELAYS, SUI5_POWERS_DB, seed, cfg)


def multipath_delays(n_paths: int, max_delay: int = 10) -> np.ndarray:
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    d = np.round(np.linspace(0, max_delay, n_paths)).astype(np.int64)
    if np.unique(d).size != n_paths:
        raise ValueError(f"{n_paths} paths do not fit on distinct delays in [0, {max_delay}]")
    return d


def make_multipath(n_paths: int, seed, cfg: OfdmConfig, max_delay: int = 10,
                   decay_db: float = 5.0) -> ChannelRealization:
    """Rayleigh taps on evenly spaced delays with an exponential power profile."""
    delays = multipath_delays(n_paths, max_delay)
    return _rayleigh_taps(delays, -decay_db * np.arange(n_paths), seed, cfg)


def noise_variance(signal_power: float, snr_db: float) -> float:
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(signal_power) / 10.0 ** (snr_db / 10.0)


def apply_channel(samples, ch: ChannelRealization, noise: NoiseConfig) -> np.ndarray:
    """Convolve with the impulse response (truncated) and add complex AWGN.

    The noise variance is set from the measured power of ``samples``.
    """
    x = np.asarray(samples, dtype=complex).ravel()
    y = np.zeros_like(x)
    for d, g in zip(ch.tap_delays, ch.tap_gains):
        if d < x.size:
            y[d:] += g * x[: x.size - d]
    var = noise_variance(np.mean(np.abs(x) ** 2), noise.snr_db) if x.size else 0.0
    if var > 0:
        rng = np.random.default_rng(noise.seed)
        y = y + np.sqrt(var / 2) * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return y


def bsc(bits, p: float, seed) -> np.ndarray:
    """Flip each bit independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability must lie in [0, 1], got {p}")
    bits = np.asarray(bits, dtype=np.uint8)
    flips = np.random.default_rng(seed).random(bits.shape) < p
    return bits ^ flips.astype(np.uint8)
