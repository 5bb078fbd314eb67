"""Seed derivation and discrete-sampling tables.

Reproducibility scheme: every Monte Carlo trial owns a private stream that
is a pure function of (master seed, trial index).  numpy-facing code gets a
Philox generator keyed through SeedSequence spawn keys; numba kernels get
xoshiro256++ states expanded from the same pair with splitmix64.  Because
trial -> stream is a pure function, results cannot depend on how trials are
chunked across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """One splitmix64 output for integer state ``x`` (taken mod 2^64)."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, label: str) -> int:
    """Stable sub-seed for a named experiment under one master seed."""
    tag = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "big")
    return splitmix64((master & MASK64) ^ tag)


def trial_generator(master: int, trial: int) -> np.random.Generator:
    """Philox generator for one trial; independent of worker layout."""
    ss = np.random.SeedSequence(entropy=master & MASK64, spawn_key=(trial,))
    return np.random.Generator(np.random.Philox(ss))


def _splitmix_vec(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def xoshiro_states(master: int, lo: int, hi: int) -> np.ndarray:
    """xoshiro256++ states for trials lo..hi-1, shape (hi-lo, 4) uint64."""
    idx = np.arange(lo, hi, dtype=np.uint64)
    z = np.uint64(master & MASK64) + np.uint64(_GOLDEN) * (idx + np.uint64(1))
    states = np.empty((hi - lo, 4), dtype=np.uint64)
    for j in range(4):
        z = _splitmix_vec(z)
        states[:, j] = z
    dead = ~states.any(axis=1)
    states[dead, 0] = np.uint64(1)
    return states


def build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table: returns (accept, alias) arrays.

    Draw: pick cell i uniformly, return i if u < accept[i] else alias[i].
    """
    p = np.asarray(probs, dtype=np.float64)
    n = p.size
    scaled = p * (n / p.sum())
    accept = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        accept[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    # leftovers are 1 up to rounding
    for i in small + large:
        accept[i] = 1.0
    return accept, alias
