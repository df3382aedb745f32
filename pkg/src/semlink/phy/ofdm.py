"""OFDM framing: pilot insertion, orthonormal IFFT/FFT and cyclic prefix."""

from dataclasses import dataclass, field

import numpy as np


def even_pilot_positions(n_sub: int, n_pilot: int) -> tuple:
    """Evenly spread pilot indices, ``floor(k * n_sub / n_pilot)``.

    For the default 272/16 grid this is every 17th bin starting at 0.
    """
    return tuple(int(k * n_sub // n_pilot) for k in range(n_pilot))


@dataclass(frozen=True)
class OfdmConfig:
    n_sub: int = 272
    n_pilot: int = 16
    cp_len: int = 72
    pilot_value: complex = 1.0 + 0.0j
    pilot_positions: tuple = field(default=None)

    def __post_init__(self):
        if self.pilot_positions is None:
            object.__setattr__(self, "pilot_positions",
                               even_pilot_positions(self.n_sub, self.n_pilot))
        pos = tuple(int(p) for p in self.pilot_positions)
        object.__setattr__(self, "pilot_positions", pos)
        if len(pos) != self.n_pilot or len(set(pos)) != self.n_pilot:
            raise ValueError("pilot_positions must hold n_pilot distinct indices")
        if any(p < 0 or p >= self.n_sub for p in pos):
            raise ValueError("pilot position outside [0, n_sub)")
        if not 0 <= self.cp_len < self.n_sub:
            raise ValueError("cp_len must satisfy 0 <= cp_len < n_sub")

    @property
    def n_data(self) -> int:
        return self.n_sub - self.n_pilot

    @property
    def symbol_len(self) -> int:
        return self.n_sub + self.cp_len

    @property
    def pilot_index(self) -> np.ndarray:
        return np.asarray(self.pilot_positions, dtype=np.int64)

    @property
    def data_index(self) -> np.ndarray:
        mask = np.ones(self.n_sub, dtype=bool)
        mask[self.pilot_index] = False
        return np.nonzero(mask)[0]

    def with_pilots(self, n_pilot: int) -> "OfdmConfig":
        return OfdmConfig(self.n_sub, n_pilot, self.cp_len, self.pilot_value)


def ofdm_modulate(grid, cfg: OfdmConfig) -> np.ndarray:
    """Map data symbols onto one or more OFDM symbols.

    ``grid`` has shape ``(..., n_data)``; the result has shape
    ``(..., n_sub + cp_len)`` with the cyclic prefix in front.
    """
    grid = np.asarray(grid, dtype=complex)
    if grid.shape[-1] != cfg.n_data:
        raise ValueError(f"grid has {grid.shape[-1]} data symbols, expected {cfg.n_data}")
    full = np.zeros(grid.shape[:-1] + (cfg.n_sub,), dtype=complex)
    full[..., cfg.data_index] = grid
    full[..., cfg.pilot_index] = cfg.pilot_value
    x = np.fft.ifft(full, axis=-1, norm="ortho")
    if cfg.cp_len:
        x = np.concatenate([x[..., -cfg.cp_len:], x], axis=-1)
    return x


def ofdm_demodulate(samples, cfg: OfdmConfig):
    """Strip the CP, FFT and split into ``(data, pilots)``."""
    samples = np.asarray(samples, dtype=complex)
    if samples.shape[-1] != cfg.symbol_len:
        raise ValueError(f"expected {cfg.symbol_len} samples per symbol, got {samples.shape[-1]}")
    freq = np.fft.fft(samples[..., cfg.cp_len:], axis=-1, norm="ortho")
    return freq[..., cfg.data_index], freq[..., cfg.pilot_index]
