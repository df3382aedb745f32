"""Counter-style seed derivation so each (experiment, point, trial, stage)
gets its own reproducible stream."""

import hashlib

import numpy as np


def derive_seed(master, *keys) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(master)).encode())
    for k in keys:
        h.update(b"\x1f")
        h.update(repr(k).encode())
    return int.from_bytes(h.digest(), "little") >> 1


def rng_for(master, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
