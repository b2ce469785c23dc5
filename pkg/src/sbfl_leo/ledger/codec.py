"""Canonical byte encoding: every field is a 4-byte big-endian length followed by its bytes.

ints are `>q`, floats `>d`, vectors `>f8`, strings UTF-8, id lists a `>q` run.
"""
from __future__ import annotations
import hashlib
import struct
from typing import Iterable, Mapping

import numpy as np

from ..errors import ConfigurationError, ChainCorruptionError

DIGEST_SIZE = 32
ALGORITHMS = ("sha256", "sha3_256", "blake2b")


def hasher(algorithm: str = "sha256"):
    if algorithm == "blake2b":
        return hashlib.blake2b(digest_size=DIGEST_SIZE)
    if algorithm in ("sha256", "sha3_256"):
        return hashlib.new(algorithm)
    raise ConfigurationError(f"unsupported digest algorithm {algorithm!r}")


def digest(data: bytes, algorithm: str = "sha256") -> bytes:
    h = hasher(algorithm)
    h.update(data)
    return h.digest()


def field_bytes(value) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, (bool, np.bool_)):
        return struct.pack(">q", int(value))
    if isinstance(value, (int, np.integer)):
        return struct.pack(">q", int(value))
    if isinstance(value, (float, np.floating)):
        return struct.pack(">d", float(value))
    if isinstance(value, np.ndarray):
        return np.ascontiguousarray(value, dtype=">f8").tobytes()
    raise TypeError(f"cannot encode {type(value).__name__}")


def encode(*fields) -> bytes:
    out = bytearray()
    for f in fields:
        b = field_bytes(f)
        out += struct.pack(">I", len(b))
        out += b
    return bytes(out)


def ids_bytes(ids: Iterable[int]) -> bytes:
    ids = sorted(int(i) for i in ids)
    return struct.pack(f">{len(ids)}q", *ids)


def mapping_bytes(m: Mapping[int, float]) -> bytes:
    """Sorted (id, value) pairs as `>qd` runs."""
    return b"".join(struct.pack(">qd", int(k), float(v)) for k, v in sorted(m.items()))


def vector_digest(w, algorithm: str = "sha256") -> bytes:
    return digest(encode(np.asarray(w, dtype=np.float64)), algorithm)


class Reader:
    """Walks a canonical byte string field by field."""

    def __init__(self, data: bytes):
        self.data = data
        self.at = 0

    def done(self) -> bool:
        return self.at >= len(self.data)

    def field(self) -> bytes:
        if self.at + 4 > len(self.data):
            raise ChainCorruptionError("truncated field length")
        (n,) = struct.unpack_from(">I", self.data, self.at)
        start = self.at + 4
        if start + n > len(self.data):
            raise ChainCorruptionError("truncated field")
        self.at = start + n
        return self.data[start:self.at]

    def int(self) -> int:
        return struct.unpack(">q", self.field())[0]


# ---------- transaction payloads ----------

def local_model_payload(w, data_size: int) -> bytes:
    return encode(np.asarray(w, dtype=np.float64), data_size)


def miner_vote_payload(choice: bytes, score: float, suspects: Iterable[int]) -> bytes:
    return encode(choice, score, ids_bytes(suspects))


def cluster_model_payload(w, score: float, suspects: Iterable[int]) -> bytes:
    return encode(np.asarray(w, dtype=np.float64), score, ids_bytes(suspects))


def head_ballot_payload(approvals: Mapping[int, bool], scores: Mapping[int, float]) -> bytes:
    return encode(mapping_bytes({k: float(v) for k, v in approvals.items()}), mapping_bytes(scores))


def reputation_payload(deltas: Mapping[int, float]) -> bytes:
    return encode(mapping_bytes(deltas))


def global_model_payload(w, accepted: Iterable[int], loss: float) -> bytes:
    return encode(np.asarray(w, dtype=np.float64), ids_bytes(accepted), loss)
