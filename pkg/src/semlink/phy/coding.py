"""Block channel codes: identity passthrough and systematic Hamming(7,4)."""

from dataclasses import dataclass

import numpy as np

# codeword = [d1 d2 d3 d4 p1 p2 p3]
_P = np.array([[1, 1, 0],
               [1, 0, 1],
               [0, 1, 1],
               [1, 1, 1]], dtype=np.uint8)
G74 = np.concatenate([np.eye(4, dtype=np.uint8), _P], axis=1)
H74 = np.concatenate([_P.T, np.eye(3, dtype=np.uint8)], axis=1)

# syndrome (as 3-bit integer) -> position of the flipped bit, -1 for none
_SYNDROME_POS = np.full(8, -1, dtype=np.int64)
for _pos in range(7):
    _s = H74[:, _pos]
    _SYNDROME_POS[(_s[0] << 2) | (_s[1] << 1) | _s[2]] = _pos

VARIANTS = ("identity", "hamming74")


@dataclass(frozen=True)
class ChannelCode:
    variant: str = "identity"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown code variant {self.variant!r}; choose from {VARIANTS}")

    @property
    def rate(self) -> float:
        return 1.0 if self.variant == "identity" else 4.0 / 7.0

    def coded_length(self, n_bits: int) -> int:
        if self.variant == "identity":
            return int(n_bits)
        return 7 * (-(-int(n_bits) // 4))


def channel_encode(bits, code: ChannelCode) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if code.variant == "identity":
        return bits.copy()
    pad = (-bits.size) % 4
    blocks = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)]).reshape(-1, 4)
    return ((blocks.astype(np.int64) @ G74) % 2).astype(np.uint8).ravel()


def channel_decode(bits, code: ChannelCode, orig_len: int) -> np.ndarray:
    """Decode ``bits`` and strip padding back to ``orig_len`` information bits.

    Hamming(7,4) uses syndrome decoding and corrects one error per block.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if code.variant == "identity":
        return bits[:orig_len].copy()
    if bits.size % 7:
        raise ValueError(f"hamming74 input length {bits.size} is not a multiple of 7")
    blocks = bits.reshape(-1, 7).copy()
    syn = (blocks.astype(np.int64) @ H74.T) % 2
    pos = _SYNDROME_POS[(syn[:, 0] << 2) | (syn[:, 1] << 1) | syn[:, 2]]
    rows = np.nonzero(pos >= 0)[0]
    blocks[rows, pos[rows]] ^= 1
    return blocks[:, :4].ravel()[:orig_len]
