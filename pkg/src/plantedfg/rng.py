"""Counter-based random streams.

Every draw is a function of ``(seed, stream_id)`` and the position in the
stream.  Parallel work is split into fixed blocks, each with its own child
stream, so results do not depend on how many workers run the blocks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

_MASK64 = (1 << 64) - 1
T = TypeVar("T")


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RngStream:
    """Philox stream keyed by ``seed`` and ``stream_id``.

    The stream is stateful (successive calls advance it) but two streams with
    the same identity produce identical sequences.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed <= _MASK64 and 0 <= stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        key = seed | (stream_id << 64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, index: int) -> "RngStream":
        """Independent child stream, a pure function of (seed, stream_id, index)."""
        child = splitmix64(splitmix64(self.stream_id) ^ splitmix64(int(index) + 1))
        return RngStream(self.seed, child)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def as_stream(rng) -> RngStream:
    """Accept an RngStream, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0, 0)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng), 0)
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return as_stream(rng).gen


def block_sizes(total: int, block: int) -> list[int]:
    """Split ``total`` into fixed-size blocks (last one possibly shorter)."""
    if total <= 0:
        return []
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def map_ordered(fn: Callable[[int], T], count: int, workers: int = 1) -> list[T]:
    """Evaluate ``fn(i)`` for i < count, returning results in index order."""
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def run_blocks(fn: Callable[[int, int, RngStream], T], total: int, block: int,
               stream: RngStream, workers: int = 1) -> list[T]:
    """Run ``fn(block_index, size, child_stream)`` over fixed blocks of ``total``."""
    sizes = block_sizes(total, block)
    return map_ordered(lambda i: fn(i, sizes[i], stream.spawn(i)), len(sizes), workers)


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)
