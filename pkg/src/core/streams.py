"""
Seeded Random Streams

All randomness flows from one master seed. Paths are split into contiguous
blocks, one per worker, and each block is simulated in fixed-size batches.
Batch b of worker w draws from SeedSequence(master_seed, spawn_key=(w, b)),
so a run is bit-reproducible for a fixed (seed, workers, batch_size) and the
per-batch results are merged in (worker, batch) order.
"""

from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Dict, Iterator, List, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

SEED_SCHEME = (
    "SeedSequence(master_seed, spawn_key=(worker, batch)); contiguous path blocks per worker; "
    "assembly checks draw from spawn_key=(stream,)"
)

BatchKernel = Callable[[np.random.Generator, int], Dict[str, np.ndarray]]


def batch_rng(master_seed: int, worker: int, batch: int) -> np.random.Generator:
    """Generator for one (worker, batch) substream"""
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(worker), int(batch)))
    return np.random.default_rng(sequence)


def check_rng(master_seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for an assembly check, disjoint from every (worker, batch) substream"""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(stream),)))


def split_paths(n_paths: int, workers: int) -> List[int]:
    """
    Split n_paths into contiguous per-worker counts.

    Args:
        n_paths: Total number of paths
        workers: Number of workers

    Returns:
        Path count per worker (earlier workers take the remainder)
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    base, extra = divmod(int(n_paths), int(workers))
    return [base + (1 if w < extra else 0) for w in range(workers)]


def iter_batches(count: int, batch_size: int) -> Iterator[Tuple[int, int]]:
    """Yield (batch index, batch size) covering count paths"""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    batch = 0
    done = 0
    while done < count:
        size = min(batch_size, count - done)
        yield batch, size
        batch += 1
        done += size


def _run_block(kernel: BatchKernel, master_seed: int, batch_size: int, worker_and_count: Tuple[int, int]) -> List[Dict]:
    worker, count = worker_and_count
    results = []
    for batch, size in iter_batches(count, batch_size):
        rng = batch_rng(master_seed, worker, batch)
        results.append(kernel(rng, size))
    return results


def map_batches(
    kernel: BatchKernel,
    n_paths: int,
    master_seed: int,
    workers: int = 1,
    batch_size: int = 20000
) -> List[Dict]:
    """
    Run a batch kernel over n_paths paths.

    Args:
        kernel: Picklable callable (rng, n) -> dict of per-batch statistics
        n_paths: Total number of paths
        master_seed: Master seed
        workers: Worker processes (1 runs inline)
        batch_size: Paths per batch

    Returns:
        Per-batch results in (worker, batch) order
    """
    counts = split_paths(n_paths, workers)
    job = partial(_run_block, kernel, master_seed, batch_size)
    jobs = [(w, c) for w, c in enumerate(counts) if c > 0]

    if workers == 1 or len(jobs) <= 1:
        blocks = [job(item) for item in jobs]
    else:
        logger.debug("Dispatching %d paths over %d workers", n_paths, len(jobs))
        with ProcessPoolExecutor(max_workers=len(jobs)) as executor:
            blocks = list(executor.map(job, jobs))

    return [result for block in blocks for result in block]


def reduce_sums(results: List[Dict]) -> Dict[str, np.ndarray]:
    """Sum per-batch statistics key by key, in order"""
    total: Dict[str, np.ndarray] = {}
    for result in results:
        for key, value in result.items():
            total[key] = total.get(key, 0) + value
    return total
