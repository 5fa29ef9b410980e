import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bandloc.rng import chunk_ranges, map_chunks, partition, substream


def _draw(start, stop, seed):
    return np.concatenate([substream(seed, i).standard_normal(3) for i in range(start, stop)])


class TestStreams:
    def test_same_key_same_stream(self):
        a = substream(7, 3, 1).standard_normal(5)
        b = substream(7, 3, 1).standard_normal(5)
        assert np.array_equal(a, b)

    def test_distinct_keys_differ(self):
        base = substream(7, 3, 0).standard_normal(5)
        for other in (substream(8, 3, 0), substream(7, 4, 0), substream(7, 3, 1), substream(7, 3, 0, tag=1)):
            assert not np.array_equal(base, other.standard_normal(5))

    def test_large_seed_accepted(self):
        substream(2**64 - 1, 0).random()


class TestChunks:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 500), st.integers(1, 9), st.integers(1, 64))
    def test_partition_covers_each_index_once(self, n, workers, chunk):
        ranges = [r for rs in partition(n, workers, chunk) for r in rs]
        idx = sorted(i for a, b in ranges for i in range(a, b))
        assert idx == list(range(n))
        assert ranges == [] or max(b - a for a, b in ranges) <= chunk

    def test_chunk_ranges(self):
        assert chunk_ranges(5, 2) == [(0, 2), (2, 4), (4, 5)]
        assert chunk_ranges(0, 3) == []

    def test_results_independent_of_worker_count(self):
        ref = np.concatenate(map_chunks(_draw, 40, workers=1, chunk=6, seed=3))
        for w in (2, 3, 8):
            got = np.concatenate(map_chunks(_draw, 40, workers=w, chunk=6, seed=3))
            assert np.array_equal(ref, got)
        assert np.array_equal(ref, _draw(0, 40, 3))
