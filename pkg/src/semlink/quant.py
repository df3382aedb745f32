"""Non-subtractive uniform dithered scalar quantization.

A quantizer with ``b`` bits splits the dynamic range ``[-gamma, gamma]`` into
``M = 2**b`` cells of width ``step = 2 * gamma / M`` and reconstructs each cell
at its midpoint.  The dithered quantizer adds a uniform dither on
``[-step/2, step/2]`` before quantizing and never subtracts it afterwards.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int
    gamma: float = 1.0

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits!r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma!r}")

    @property
    def levels(self) -> int:
        return 2 ** int(self.bits)

    @property
    def step(self) -> float:
        return 2.0 * self.gamma / self.levels

    def level_values(self) -> np.ndarray:
        """All reconstruction levels, ordered by index."""
        return -self.gamma + self.step * (np.arange(self.levels) + 0.5)


class DitherSource:
    """Seeded stream of dither samples uniform on ``[-step/2, step/2]``.

    The stream draws unit uniforms and scales them by the step of the current
    spec, so changing ``spec`` between draws keeps the underlying sequence.
    """

    def __init__(self, seed, spec: QuantizerSpec):
        self.seed = seed
        self.spec = spec
        self._rng = np.random.default_rng(seed)

    def draw(self, size=None):
        u = self._rng.uniform(-0.5, 0.5, size=size)
        return u * self.spec.step


def _check_finite(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("invalid sample: quantizer input must be finite")
    return y


def quantize_index(y, bits, gamma=1.0):
    """Cell index of ``y`` for a uniform quantizer (vectorised).

    ``bits`` may be a scalar or broadcast against ``y`` so that rows of a
    feature matrix can use different resolutions.  Boundary points belong to
    the lower cell, ``+gamma`` to the top cell and anything outside the range
    saturates to the outermost cell.
    """
    y = _check_finite(y)
    levels = 2 ** np.asarray(bits, dtype=np.int64)
    step = 2.0 * gamma / levels
    idx = np.ceil((y + gamma) / step).astype(np.int64) - 1
    return np.clip(idx, 0, levels - 1)


def index_to_level(index, bits, gamma=1.0):
    levels = 2 ** np.asarray(bits, dtype=np.int64)
    step = 2.0 * gamma / levels
    return -gamma + step * (np.asarray(index) + 0.5)


def uniform_quantize(y, spec: QuantizerSpec):
    """Uniform (undithered) quantizer output for ``y``."""
    idx = quantize_index(y, spec.bits, spec.gamma)
    out = index_to_level(idx, spec.bits, spec.gamma)
    return float(out) if np.ndim(out) == 0 else out


def dithered_quantize(y, spec: QuantizerSpec, dither: DitherSource):
    """Quantize ``y + z`` with ``z`` drawn from ``dither``.

    Returns ``(index, value)``; the dither is not subtracted from ``value``.
    """
    y = _check_finite(y)
    z = dither.draw(size=y.shape if y.ndim else None)
    idx = quantize_index(y + z, spec.bits, spec.gamma)
    val = index_to_level(idx, spec.bits, spec.gamma)
    if np.ndim(idx) == 0:
        return int(idx), float(val)
    return idx, val


def encode_bits(index, spec_or_bits) -> np.ndarray:
    """Big-endian fixed-width binary of ``index`` as a uint8 array."""
    b = spec_or_bits.bits if isinstance(spec_or_bits, QuantizerSpec) else int(spec_or_bits)
    index = np.asarray(index, dtype=np.int64)
    if np.any(index < 0) or np.any(index >= 2 ** b):
        raise ValueError(f"index out of range for {b}-bit quantizer")
    shifts = np.arange(b - 1, -1, -1, dtype=np.int64)
    return ((index[..., None] >> shifts) & 1).astype(np.uint8)


def decode_bits(bits) -> np.ndarray:
    """Inverse of :func:`encode_bits` along the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def dequantize(bits, spec: QuantizerSpec):
    """Reconstruction level for a ``spec.bits``-long bit pattern."""
    bits = np.asarray(bits)
    if bits.shape[-1:] != (spec.bits,):
        raise ValueError(
            f"expected {spec.bits} bits per sample, got shape {bits.shape}")
    out = index_to_level(decode_bits(bits), spec.bits, spec.gamma)
    return float(out) if np.ndim(out) == 0 else out
