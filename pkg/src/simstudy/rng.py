"""Chunk-keyed pseudorandom streams with capturable end states.

Each (global seed, model name, chunk index) triple selects its own Philox4x64
stream. The 128-bit Philox key is the first 16 bytes of a SHA-256 digest of a
length-prefixed encoding of the triple, so streams never depend on the process,
thread or order in which they are created.

Variates are produced from raw 64-bit outputs with fixed, documented transforms:
uniforms from the top 53 bits, normals by inverse CDF. Every variate consumes
exactly one raw output, so the amount of stream used is independent of the data.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from simstudy.errors import StateVersionError

ALGORITHM = "philox4x64-sha256key"
VERSION = 1
DEFAULT_SEED = 2016

_STATE_FMT = "<4Q2Q4QIII"
_TWO_NEG_53 = 2.0 ** -53


@dataclass(frozen=True)
class StreamKey:
    global_seed: int
    model_name: str
    chunk_index: int

    def __post_init__(self):
        if not 0 <= self.global_seed < 2**64:
            raise ValueError("global_seed must be a 64-bit unsigned integer")

    def digest(self) -> bytes:
        name = self.model_name.encode("utf-8")
        blob = b"".join([
            b"simstudy-stream\x00",
            struct.pack("<QQ", self.global_seed, len(name)),
            name,
            struct.pack("<q", self.chunk_index),
        ])
        return hashlib.sha256(blob).digest()


@dataclass(frozen=True)
class RngState:
    algorithm: str
    version: int
    state: bytes

    def to_record(self) -> dict:
        return {"algorithm": self.algorithm, "version": self.version, "state": self.state.hex()}

    @classmethod
    def from_record(cls, record: dict) -> RngState:
        return cls(record["algorithm"], int(record["version"]), bytes.fromhex(record["state"]))


class Stream:
    """A single-owner pseudorandom stream."""

    def __init__(self, bitgen: np.random.Philox):
        self._bitgen = bitgen

    @classmethod
    def from_digest(cls, digest: bytes) -> Stream:
        key = int.from_bytes(digest[:16], "little")
        return cls(np.random.Philox(key=key))

    def random_raw(self, size: int) -> np.ndarray:
        return np.asarray(self._bitgen.random_raw(size), dtype=np.uint64)

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        shape = () if size is None else size
        n = int(np.prod(shape))
        raw = self.random_raw(n)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG_53
        return float(u[0]) if size is None else u.reshape(shape)

    def normal(self, size=None):
        """Standard normal variates by inverse CDF of :meth:`uniform`."""
        u = self.uniform(size)
        return float(ndtri(u)) if size is None else ndtri(u)

    def integers(self, high: int, size: int) -> np.ndarray:
        """Integers in ``[0, high)``, one raw output each (53-bit multiply-shift)."""
        raw = self.random_raw(size)
        return np.array([((int(r) >> 11) * high) >> 53 for r in raw], dtype=np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """A uniformly random permutation of ``0..n-1`` (Fisher-Yates)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        raw = self.random_raw(n - 1)
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = ((int(raw[step]) >> 11) * (i + 1)) >> 53
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def substream(self, *labels) -> Stream:
        """Derive an independent stream from the current state without advancing it."""
        h = hashlib.sha256(b"simstudy-substream\x00" + capture_state(self).state)
        for label in labels:
            text = str(label).encode("utf-8")
            h.update(struct.pack("<Q", len(text)) + text)
        return Stream.from_digest(h.digest())

    def numpy_generator(self) -> np.random.Generator:
        """A numpy Generator sharing this stream's state.

        numpy's own distribution algorithms may change between numpy releases, so
        results drawn through it are reproducible only for a fixed numpy version.
        """
        return np.random.Generator(self._bitgen)


def derive_chunk_stream(key: StreamKey) -> Stream:
    if key.chunk_index < 1:
        raise ValueError("chunk_index must be >= 1")
    return Stream.from_digest(key.digest())


def derive_model_stream(global_seed: int, model_key: str) -> Stream:
    """Stream reserved for model construction (chunk index 0)."""
    return Stream.from_digest(StreamKey(global_seed, model_key, 0).digest())


def capture_state(stream: Stream) -> RngState:
    st = stream._bitgen.state
    inner = st["state"]
    packed = struct.pack(
        _STATE_FMT,
        *(int(v) for v in inner["counter"]),
        *(int(v) for v in inner["key"]),
        *(int(v) for v in st["buffer"]),
        int(st["buffer_pos"]),
        int(st["has_uint32"]),
        int(st["uinteger"]),
    )
    return RngState(ALGORITHM, VERSION, packed)


def restore_state(state: RngState) -> Stream:
    if state.algorithm != ALGORITHM or state.version != VERSION:
        raise StateVersionError(
            f"RNG state was written by {state.algorithm} v{state.version}; "
            f"this build reads {ALGORITHM} v{VERSION}"
        )
    if len(state.state) != struct.calcsize(_STATE_FMT):
        raise StateVersionError("RNG state has the wrong length")
    vals = struct.unpack(_STATE_FMT, state.state)
    bitgen = np.random.Philox()
    bitgen.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.array(vals[0:4], dtype=np.uint64),
            "key": np.array(vals[4:6], dtype=np.uint64),
        },
        "buffer": np.array(vals[6:10], dtype=np.uint64),
        "buffer_pos": vals[10],
        "has_uint32": vals[11],
        "uinteger": vals[12],
    }
    return Stream(bitgen)


def method_stream_for(draws) -> Stream:
    """Fresh stream positioned at the end state saved with a draws batch."""
    return restore_state(draws.rng_end_state)
