"""Knowledge-base file: trained codec, stored task relevance and DPPO policy.

Binary layout (all integers little-endian)::

    file    := b"SLNK" u16:version u16:n_sections section*
    section := 4s:tag u64:payload_len payload
    payload := u32:meta_len meta u32:n_arrays array*
    meta    := UTF-8 JSON object with the scalar fields of the section
    array   := u8:ndim u32[ndim]:dims f64[prod(dims)] (C order, little-endian)

Section tags: ``SLNK`` codec (enc_w, enc_b, w1, b1, w2, b2), ``STRW`` task
relevance (g), ``DPPO`` one trained policy (actor layers then critic
layers, each weight followed by its bias); a file may hold several ``DPPO``
sections told apart by the ``variant`` field of their metadata.  Unknown
tags are skipped on load so newer files with extra sections remain readable.
"""

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .dppo import PolicyParams
from .semcodec import CodecParams

MAGIC = b"SLNK"
VERSION = 1


@dataclass
class KnowledgeBase:
    codec: CodecParams = None
    g: np.ndarray = None
    policies: dict = field(default_factory=dict)   # variant name -> PolicyParams

    @property
    def policy(self) -> PolicyParams:
        return self.policies.get("dppo")


def _pack_section(tag: bytes, meta: dict, arrays) -> bytes:
    buf = io.BytesIO()
    m = json.dumps(meta, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(m)))
    buf.write(m)
    buf.write(struct.pack("<I", len(arrays)))
    for a in arrays:
        a = np.ascontiguousarray(a, dtype="<f8")
        buf.write(struct.pack("<B", a.ndim))
        buf.write(struct.pack(f"<{a.ndim}I", *a.shape))
        buf.write(a.tobytes())
    payload = buf.getvalue()
    return tag + struct.pack("<Q", len(payload)) + payload


def _unpack_payload(payload: bytes):
    pos = 0
    (mlen,) = struct.unpack_from("<I", payload, pos)
    pos += 4
    meta = json.loads(payload[pos:pos + mlen].decode())
    pos += mlen
    (n,) = struct.unpack_from("<I", payload, pos)
    pos += 4
    arrays = []
    for _ in range(n):
        (ndim,) = struct.unpack_from("<B", payload, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}I", payload, pos)
        pos += 4 * ndim
        count = int(np.prod(dims)) if ndim else 1
        a = np.frombuffer(payload, dtype="<f8", count=count, offset=pos).reshape(dims)
        pos += 8 * count
        arrays.append(a.astype(float))
    if pos != len(payload):
        raise ValueError("section payload has trailing bytes")
    return meta, arrays


def to_bytes(kb: KnowledgeBase) -> bytes:
    sections = []
    if kb.codec is not None:
        c = kb.codec
        meta = {"shape": list(c.shape), "seed": int(c.seed), "train_accuracy": float(c.train_accuracy)}
        sections.append(_pack_section(b"SLNK", meta, [c.enc_w, c.enc_b, c.w1, c.b1, c.w2, c.b2]))
    if kb.g is not None:
        sections.append(_pack_section(b"STRW", {}, [np.asarray(kb.g, dtype=float)]))
    for variant in sorted(kb.policies):
        p = kb.policies[variant]
        meta = {"variant": variant, "max_bits": int(p.max_bits), "value_scale": float(p.value_scale),
                "hidden": list(p.hidden), "n_actor": len(p.actor)}
        sections.append(_pack_section(b"DPPO", meta, p.actor + p.critic))
    return MAGIC + struct.pack("<HH", VERSION, len(sections)) + b"".join(sections)


def from_bytes(data: bytes) -> KnowledgeBase:
    if len(data) < 8 or data[:4] != MAGIC:
        raise ValueError("not a knowledge-base file (bad magic)")
    version, n_sections = struct.unpack_from("<HH", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported knowledge-base version {version}")
    kb = KnowledgeBase()
    pos = 8
    for _ in range(n_sections):
        if pos + 12 > len(data):
            raise ValueError("truncated knowledge-base file")
        tag = data[pos:pos + 4]
        (plen,) = struct.unpack_from("<Q", data, pos + 4)
        pos += 12
        payload = data[pos:pos + plen]
        if len(payload) != plen:
            raise ValueError("truncated knowledge-base file")
        pos += plen
        if tag == b"SLNK":
            meta, arr = _unpack_payload(payload)
            kb.codec = CodecParams(*arr, shape=tuple(meta["shape"]), seed=meta["seed"],
                                   train_accuracy=meta["train_accuracy"])
        elif tag == b"STRW":
            kb.g = _unpack_payload(payload)[1][0]
        elif tag == b"DPPO":
            meta, arr = _unpack_payload(payload)
            k = meta["n_actor"]
            kb.policies[meta["variant"]] = PolicyParams(
                arr[:k], arr[k:], meta["max_bits"], meta["value_scale"], tuple(meta["hidden"]))
    if pos != len(data):
        raise ValueError("trailing bytes after last section")
    return kb


def save_kb(path, kb: KnowledgeBase):
    with open(path, "wb") as fh:
        fh.write(to_bytes(kb))


def load_kb(path) -> KnowledgeBase:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
