import struct

import numpy as np
import pytest

from semlink.dppo import init_policy
from semlink.kb import KnowledgeBase, from_bytes, load_kb, save_kb, to_bytes
from semlink.semcodec import init_codec
from semlink.seeds import derive_seed, rng_for


def sample_kb():
    codec = init_codec(6, (4, 2, 2), n_classes=3, hidden=5, seed=2)
    codec.train_accuracy = 0.875
    pols = {"dppo": init_policy(5, (6, 6), seed=1, value_scale=3.5),
            "dppo_simplified": init_policy(5, (4, 4), seed=2)}
    return KnowledgeBase(codec, np.array([0.1, 0.0, 2.5, 1e-300]), pols)


def test_round_trip_is_exact(tmp_path):
    kb = sample_kb()
    path = tmp_path / "kb.bin"
    save_kb(path, kb)
    back = load_kb(path)
    for name in ("enc_w", "enc_b", "w1", "b1", "w2", "b2"):
        assert getattr(back.codec, name).tobytes() == getattr(kb.codec, name).tobytes()
    assert back.codec.shape == (4, 2, 2) and back.codec.train_accuracy == 0.875
    assert back.g.tobytes() == kb.g.tobytes()
    assert set(back.policies) == {"dppo", "dppo_simplified"}
    for name, p in kb.policies.items():
        q = back.policies[name]
        assert q.max_bits == p.max_bits and q.value_scale == p.value_scale and q.hidden == p.hidden
        assert all(a.tobytes() == b.tobytes() for a, b in zip(p.arrays, q.arrays))
    assert back.policy is back.policies["dppo"]
    assert to_bytes(back) == to_bytes(kb)


def test_header_layout():
    data = to_bytes(sample_kb())
    assert data[:4] == b"SLNK"
    version, n = struct.unpack_from("<HH", data, 4)
    assert version == 1 and n == 4
    tags = []
    pos = 8
    for _ in range(n):
        tags.append(data[pos:pos + 4])
        (plen,) = struct.unpack_from("<Q", data, pos + 4)
        pos += 12 + plen
    assert tags == [b"SLNK", b"STRW", b"DPPO", b"DPPO"] and pos == len(data)


def test_partial_and_unknown_sections():
    kb = KnowledgeBase(g=np.arange(3.0))
    data = to_bytes(kb)
    back = from_bytes(data)
    assert back.codec is None and back.policy is None and back.g.tolist() == [0, 1, 2]
    # append an unknown section and bump the count: it is skipped
    extra = b"XTRA" + struct.pack("<Q", 3) + b"abc"
    n = struct.unpack_from("<H", data, 6)[0] + 1
    patched = data[:6] + struct.pack("<H", n) + data[8:] + extra
    assert from_bytes(patched).g.tolist() == [0, 1, 2]


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXX" + d[4:],
    lambda d: d[:4] + struct.pack("<H", 9) + d[6:],
    lambda d: d[:-5],
    lambda d: d + b"\0",
    lambda d: d[:6],
])
def test_corrupt_files_rejected(mutate):
    with pytest.raises(ValueError):
        from_bytes(mutate(to_bytes(sample_kb())))


def test_derive_seed_properties():
    a = derive_seed(1, "episode", 3, 0)
    assert a == derive_seed(1, "episode", 3, 0)
    assert 0 <= a < 2 ** 63
    seen = {derive_seed(1, "episode", i, j) for i in range(50) for j in range(4)}
    assert len(seen) == 200
    assert derive_seed(1, "a", "b") != derive_seed(1, "ab")
    assert derive_seed(1, 3) != derive_seed(1, "3")
    assert derive_seed(2 ** 64 - 1, "x") != derive_seed(0, "x")
    np.testing.assert_array_equal(rng_for(5, "k").random(4), rng_for(5, "k").random(4))
