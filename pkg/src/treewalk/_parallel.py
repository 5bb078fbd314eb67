"""Deterministic chunked execution of independent Monte Carlo trials.

Trials are split into fixed-size chunks (a pure function of the trial count,
never of the worker count) and each chunk is handled by a module-level worker
callable.  Per-trial streams are keyed by (master seed, trial index), so the
merged per-trial arrays are identical for any number of workers.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def chunk_ranges(n_trials: int, chunk_size: int | None = None):
    """Split 0..n_trials into [lo, hi) ranges; policy independent of workers."""
    if chunk_size is None:
        chunk_size = max(64, min(65536, -(-n_trials // 64)))
    return [(lo, min(lo + chunk_size, n_trials))
            for lo in range(0, n_trials, chunk_size)]


def map_trials(worker, common, n_trials: int, workers: int = 1,
               chunk_size: int | None = None) -> dict[str, np.ndarray]:
    """Run ``worker(common, lo, hi) -> dict[str, ndarray]`` over all chunks.

    Returns the per-key concatenation in trial order.  ``worker`` must be a
    module-level (picklable) callable when workers > 1.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    ranges = chunk_ranges(n_trials, chunk_size)
    if workers <= 1 or len(ranges) == 1:
        parts = [worker(common, lo, hi) for lo, hi in ranges]
    else:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            futures = [pool.submit(worker, common, lo, hi) for lo, hi in ranges]
            parts = [f.result() for f in futures]
    merged: dict[str, np.ndarray] = {}
    for key in parts[0]:
        merged[key] = np.concatenate([p[key] for p in parts])
    return merged
