"""
Counter-based random streams and deterministic block-parallel maps.

Every Monte Carlo engine in the package draws its randomness block by block.
A block's generator is keyed by (seed, domain, block index), so the samples a
block produces do not depend on which thread runs it or in what order.
Results are always concatenated in block order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import IntEnum
from typing import Callable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Samples per block; part of the determinism contract, do not change per run
BLOCK_SIZE = 4096


class StreamDomain(IntEnum):
    """Independent stream families, one per consumer of randomness."""
    SAMPLING = 1
    LASER_NOISE = 2
    QJUMP = 3
    RESAMPLING = 4


def block_generator(seed: int, domain: StreamDomain, block: int) -> np.random.Generator:
    """Philox generator for one block of one domain."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(domain), int(block)))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *key: int) -> int:
    """Derive an independent 63-bit seed from (seed, key...).

    Used to give bit "0" and bit "1" runs of one experiment separate streams.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def block_bounds(count: int, block_size: int = BLOCK_SIZE) -> List[tuple]:
    """[(start, stop), ...] covering range(count) in fixed-size blocks."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    return [(start, min(start + block_size, count)) for start in range(0, count, block_size)]


def map_blocks(
    work: Callable[[int, int, int], T],
    count: int,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> List[T]:
    """Run work(block_index, start, stop) over all blocks, results in block order.

    Workers must not share mutable state; each builds its own generator
    from block_generator().
    """
    bounds = block_bounds(count, block_size)
    if threads <= 1 or len(bounds) <= 1:
        return [work(i, start, stop) for i, (start, stop) in enumerate(bounds)]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, i, start, stop) for i, (start, stop) in enumerate(bounds)]
        return [future.result() for future in futures]


def concatenate(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate block results; an empty run yields an empty complex array."""
    if not parts:
        return np.empty(0, dtype=complex)
    return np.concatenate(parts)
