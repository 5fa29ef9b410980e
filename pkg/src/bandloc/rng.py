"""Counter-based random streams and schedule-independent work partitioning.

Every random draw in the package comes from a Philox stream keyed by
``(seed, tag, sample, attempt)``.  A sample's draws therefore never depend on
which worker produced it or on how many samples were requested alongside it.

Work is cut into chunks whose boundaries depend only on the total sample
count and a fixed chunk size.  Workers receive whole chunks, so the numerical
path taken for every sample (including batched LAPACK calls) is identical for
any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TAG_MATRIX",
    "TAG_SHIFT",
    "TAG_SCALAR",
    "substream",
    "chunk_ranges",
    "partition",
    "map_chunks",
]

# Stream purposes; distinct tags give independent families of streams.
TAG_MATRIX = 0
TAG_SHIFT = 1
TAG_SCALAR = 2

DEFAULT_CHUNK = 256


def substream(seed: int, sample: int, attempt: int = 0, tag: int = TAG_MATRIX) -> np.random.Generator:
    """Return the generator owned by one sample.

    Parameters
    ----------
    seed : int
        Master seed of the experiment (64-bit).
    sample : int
        Zero-based sample index.
    attempt : int
        Resampling counter; a rejected draw is replaced by ``attempt + 1``.
    tag : int
        Stream purpose, see the ``TAG_*`` constants.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(tag), int(sample), int(attempt)))
    return np.random.Generator(np.random.Philox(ss))


def chunk_ranges(n: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    if n < 0:
        raise ValueError("sample count must be non-negative")
    chunk = max(1, int(chunk))
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]


def partition(n: int, workers: int, chunk: int = DEFAULT_CHUNK) -> list[list[tuple[int, int]]]:
    """Static round-robin assignment of chunks to workers."""
    workers = max(1, int(workers))
    out: list[list[tuple[int, int]]] = [[] for _ in range(workers)]
    for k, r in enumerate(chunk_ranges(n, chunk)):
        out[k % workers].append(r)
    return out


def _run_ranges(fn: Callable, ranges: Sequence[tuple[int, int]], kwargs: dict) -> list:
    return [fn(a, b, **kwargs) for a, b in ranges]


def map_chunks(fn: Callable, n: int, workers: int = 1, chunk: int = DEFAULT_CHUNK, **kwargs) -> list:
    """Evaluate ``fn(start, stop, **kwargs)`` on every chunk, results in chunk order.

    ``fn`` must be a module-level function when ``workers > 1``.
    """
    ranges = chunk_ranges(n, chunk)
    if workers <= 1 or len(ranges) <= 1:
        return _run_ranges(fn, ranges, kwargs)
    plan = partition(n, workers, chunk)
    with ProcessPoolExecutor(max_workers=len(plan)) as ex:
        futures = [ex.submit(_run_ranges, fn, rs, kwargs) for rs in plan if rs]
        per_worker = [f.result() for f in futures]
    # undo the round-robin interleave
    results: list = [None] * len(ranges)
    for w, res in enumerate(per_worker):
        for k, r in enumerate(res):
            results[w + k * len(plan)] = r
    return results
