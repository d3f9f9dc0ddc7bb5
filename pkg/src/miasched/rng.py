"""Counter-based random streams.

Each stream is a Philox generator keyed by ``(seed, label)``; draw number
``n`` lives at a fixed counter position, so any stretch of a stream can be
regenerated without replaying what came before it.
"""

from __future__ import annotations

import hashlib
from typing import Iterator, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
CHUNK = 4096
# Philox emits four 64-bit words per counter increment; random() uses one per double.
_WORDS_PER_COUNTER = 4


def label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def derive_seed(seed: int, *parts) -> int:
    """Child seed for a sub-run (e.g. one repetition of a sweep)."""
    text = ":".join(str(x) for x in (seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") >> 1


class CounterStream:
    """Uniform(0, 1) draws addressed by position."""

    def __init__(self, seed: int, label: str):
        self.seed = seed
        self.label = label
        self._key = np.array([seed & _MASK64, label_key(label)], dtype=np.uint64)

    def chunk(self, index: int) -> np.ndarray:
        counter = np.array([index * (CHUNK // _WORDS_PER_COUNTER), 0, 0, 0], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=self._key, counter=counter))
        return gen.random(CHUNK)

    def uniform(self, position: int) -> float:
        return float(self.chunk(position // CHUNK)[position % CHUNK])

    def uniforms(self, start: int, count: int) -> np.ndarray:
        if count <= 0:
            return np.empty(0)
        first, last = start // CHUNK, (start + count - 1) // CHUNK
        block = np.concatenate([self.chunk(c) for c in range(first, last + 1)])
        offset = start - first * CHUNK
        return block[offset : offset + count]


class CategoricalStream:
    """Iterator of category indices drawn i.i.d. from ``probs``."""

    def __init__(self, stream: CounterStream, probs: Sequence[float]):
        cdf = np.cumsum(np.asarray(probs, dtype=float))
        cdf[-1] = 1.0
        self._cdf = cdf
        self._stream = stream
        self._top = len(cdf) - 1
        self._buf: list[int] = []
        self._pos = 0
        self._chunk = 0
        self.drawn = 0

    def _map(self, u: np.ndarray) -> list[int]:
        # side="right" never lands on a zero-probability category.
        idx = np.searchsorted(self._cdf, u, side="right")
        return np.minimum(idx, self._top).tolist()

    def at(self, position: int) -> int:
        return self._map(np.array([self._stream.uniform(position)]))[0]

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._map(self._stream.chunk(self._chunk))
            self._chunk += 1
            self._pos = 0
        value = self._buf[self._pos]
        self._pos += 1
        self.drawn += 1
        return value


class RandomStreams:
    """Independent channel and packet-length streams for one run."""

    def __init__(self, seed: int):
        self.seed = seed

    def stream(self, label: str) -> CounterStream:
        return CounterStream(self.seed, label)

    def channel(self, probs: Sequence[float]) -> CategoricalStream:
        return CategoricalStream(self.stream("channel"), probs)

    def packets(self, probs: Sequence[float]) -> CategoricalStream:
        return CategoricalStream(self.stream("packet"), probs)
