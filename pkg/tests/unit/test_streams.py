"""
Unit tests for ampchannel/streams.py.

Block generators are keyed by (seed, domain, block), so results must not
depend on the thread count or on which other blocks run.
"""

import numpy as np
import pytest

from ampchannel.streams import (
    BLOCK_SIZE,
    StreamDomain,
    block_bounds,
    block_generator,
    concatenate,
    derive_seed,
    map_blocks,
)


# ── block_generator ──────────────────────────────────────────────────

class TestBlockGenerator:
    def test_same_key_same_stream(self):
        a = block_generator(5, StreamDomain.SAMPLING, 3).standard_normal(8)
        b = block_generator(5, StreamDomain.SAMPLING, 3).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("other", [
        (6, StreamDomain.SAMPLING, 3),
        (5, StreamDomain.LASER_NOISE, 3),
        (5, StreamDomain.SAMPLING, 4),
    ], ids=["seed", "domain", "block"])
    def test_any_key_change_gives_new_stream(self, other):
        a = block_generator(5, StreamDomain.SAMPLING, 3).standard_normal(8)
        b = block_generator(*other).standard_normal(8)
        assert not np.array_equal(a, b)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            block_generator(-1, StreamDomain.SAMPLING, 0)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(42, 1) == derive_seed(42, 1)

    def test_keys_separate(self):
        assert derive_seed(42, 0) != derive_seed(42, 1)

    def test_fits_63_bits(self):
        assert 0 <= derive_seed(2 ** 40, 7, 3) < 2 ** 63


# ── block_bounds / map_blocks ────────────────────────────────────────

class TestBlockBounds:
    def test_covers_range(self):
        bounds = block_bounds(10000)
        assert bounds[0] == (0, BLOCK_SIZE)
        assert bounds[-1][1] == 10000
        assert sum(stop - start for start, stop in bounds) == 10000

    def test_empty(self):
        assert block_bounds(0) == []

    def test_negative_count(self):
        with pytest.raises(ValueError):
            block_bounds(-1)


class TestMapBlocks:
    @staticmethod
    def _work(index, start, stop):
        rng = block_generator(9, StreamDomain.SAMPLING, index)
        return rng.standard_normal(stop - start)

    def test_thread_count_does_not_change_result(self):
        serial = concatenate(map_blocks(self._work, 20000, threads=1))
        threaded = concatenate(map_blocks(self._work, 20000, threads=8))
        np.testing.assert_array_equal(serial, threaded)

    def test_results_in_block_order(self):
        parts = map_blocks(lambda i, start, stop: i, 50, threads=4, block_size=7)
        assert parts == list(range(8))

    def test_concatenate_empty(self):
        result = concatenate([])
        assert result.size == 0
        assert result.dtype == complex
