"""Deterministic randomness: keyed counter-based uniforms and replica streams.

Two kinds of randomness are used throughout:

* per-edge disorder values, which must depend only on (master seed, stream
  label, edge id) so that an environment is bit-identical no matter in which
  order or on how many workers the edges are evaluated;
* sequential walk/replica streams, keyed by (master seed, stream label).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays (wraparound is
    part of the construction)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _label_key(label) -> np.uint64:
    """Stable 64-bit key for a stream label (int or str)."""
    if isinstance(label, (int, np.integer)):
        with np.errstate(over="ignore"):
            return _mix64(np.uint64(int(label) & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return np.uint64(int.from_bytes(digest, "little"))


def stream_key(seed: int, label) -> np.uint64:
    """Combined 64-bit key for (master seed, stream label)."""
    with np.errstate(over="ignore"):
        k = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        return _mix64(k ^ _label_key(label))


def keyed_uniforms(seed: int, label, ids) -> np.ndarray:
    """Uniform(0,1) value per id, a pure function of (seed, label, id).

    Values are independent of evaluation order and of how ids are batched,
    which makes environments reproducible across worker counts.
    """
    ids = np.asarray(ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(stream_key(seed, label) + (ids + np.uint64(1)) * _GOLDEN)
    # top 53 bits, shifted into (0, 1) so inverse CDFs with poles at 0 are safe
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) / _U53


@dataclass
class RngStream:
    """Sequential random stream keyed by (master seed, label).

    Streams with distinct labels are statistically independent; replaying a
    stream with the same key reproduces the same draws.
    """

    seed: int
    label: int | str = 0
    _gen: np.random.Generator = field(init=False, repr=False, default=None)

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=int(stream_key(self.seed, self.label)))
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def substream(self, label) -> "RngStream":
        """Derive an independent stream; label composition is associative-free
        but deterministic."""
        return RngStream(int(stream_key(self.seed, self.label)), label)


class UniformSupply:
    """Blocked scalar uniforms from a generator; cheap repeated consumption."""

    __slots__ = ("_gen", "_block", "_buf", "_pos")

    def __init__(self, gen: np.random.Generator, block: int = 1 << 14):
        self._gen = gen
        self._block = block
        self._buf = gen.random(block)
        self._pos = 0

    def u(self) -> float:
        if self._pos >= self._block:
            self._buf = self._gen.random(self._block)
            self._pos = 0
        val = self._buf[self._pos]
        self._pos += 1
        return val


def as_supply(stream) -> UniformSupply:
    """Persistent UniformSupply for a stream or bare generator."""
    if isinstance(stream, UniformSupply):
        return stream
    if isinstance(stream, RngStream):
        sup = getattr(stream, "_supply", None)
        if sup is None:
            sup = UniformSupply(stream.generator)
            stream._supply = sup
        return sup
    return UniformSupply(stream, block=1 << 10)
