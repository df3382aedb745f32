"""Square 64QAM with per-axis Gray mapping.

Each symbol carries six bits: the first three select the in-phase amplitude,
the last three the quadrature amplitude.  On each axis the 3-bit Gray value
``g`` sits at position ``i = gray_inverse(g)`` with amplitude ``7 - 2 i``, so
``000`` maps to ``+7`` and the all-zero pattern to ``(7 + 7j) / sqrt(42)``.
Average symbol energy over the constellation is exactly one.
"""

import numpy as np

SCALE = np.sqrt(42.0)
BITS_PER_SYMBOL = 6

_POS = np.arange(8)
_GRAY = _POS ^ (_POS >> 1)                # gray value at each position
_AMP_OF_GRAY = np.empty(8)
_AMP_OF_GRAY[_GRAY] = 7.0 - 2.0 * _POS    # amplitude indexed by gray value
# candidate amplitudes listed in ascending gray value; argmin then breaks
# ties toward the smaller gray index
_CANDIDATES = _AMP_OF_GRAY.copy()


def constellation() -> np.ndarray:
    """All 64 points indexed by the 6-bit pattern value (I bits high)."""
    g = np.arange(64)
    return (_AMP_OF_GRAY[g >> 3] + 1j * _AMP_OF_GRAY[g & 7]) / SCALE


def qam64_modulate(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % BITS_PER_SYMBOL:
        raise ValueError("bit count must be a multiple of 6; pad before modulating")
    groups = bits.reshape(-1, 6)
    gi = groups[:, 0] * 4 + groups[:, 1] * 2 + groups[:, 2]
    gq = groups[:, 3] * 4 + groups[:, 4] * 2 + groups[:, 5]
    return (_AMP_OF_GRAY[gi] + 1j * _AMP_OF_GRAY[gq]) / SCALE


def _axis_decide(x):
    d = np.abs(x[:, None] * SCALE - _CANDIDATES[None, :])
    return np.argmin(d, axis=1)


def qam64_demodulate(symbols) -> np.ndarray:
    """Hard-decision nearest-point demapping back to bits."""
    s = np.asarray(symbols, dtype=complex).ravel()
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite symbol")
    gi = _axis_decide(s.real)
    gq = _axis_decide(s.imag)
    shifts = np.array([2, 1, 0])
    bi = (gi[:, None] >> shifts) & 1
    bq = (gq[:, None] >> shifts) & 1
    return np.concatenate([bi, bq], axis=1).astype(np.uint8).ravel()


def pad_to_symbols(bits) -> tuple[np.ndarray, int]:
    """Zero-pad ``bits`` to a multiple of six; returns (padded, pad length)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    pad = (-bits.size) % BITS_PER_SYMBOL
    return np.concatenate([bits, np.zeros(pad, dtype=np.uint8)]), pad
