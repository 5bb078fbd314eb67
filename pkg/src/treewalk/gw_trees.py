"""Plane trees and critical Galton-Watson sampling.

Trees are stored in Lukasiewicz form: the sequence of child counts along the
depth-first (lexicographic) traversal.  Sampling supports the unconditioned
law with a hard vertex cap and the law conditioned on exact total progeny,
the latter via rejection on multinomial child-count vectors followed by the
cycle-lemma rotation, which is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ._kernels import pair_distance_counts, parent_height_from_counts
from ._rng import build_alias

__all__ = [
    "CapExceeded",
    "OffspringDist",
    "PeriodicOffspring",
    "PlaneTree",
    "UnreachableSize",
    "distance_profile",
    "kemperman_ratio",
    "mrca_and_distance",
    "sample_gw_conditioned",
    "sample_gw_unconditioned",
    "total_progeny_pmf",
]

_TOL = 1e-12
_GEOMETRIC_TAIL = 1e-15


class UnreachableSize(ValueError):
    """Requested total progeny has probability zero under this offspring law."""


class PeriodicOffspring(ValueError):
    """Offspring support lies in a strict subgroup of Z; ratio undefined."""


@dataclass(frozen=True)
class CapExceeded:
    """Unconditioned DFS generation passed ``cap`` vertices; tree discarded."""

    cap: int


class OffspringDist:
    """Critical offspring law on Z_+ with cached moments and sampling tables.

    ``pmf[k]`` is the probability of k children.  The law must sum to one and
    have mean exactly one (both within 1e-12) and positive variance.
    """

    def __init__(self, pmf):
        p = np.asarray(pmf, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("pmf must be a 1-d array over child counts 0..K")
        if np.any(p < 0):
            raise ValueError("pmf has negative entries")
        if abs(p.sum() - 1.0) > _TOL:
            raise ValueError(f"pmf sums to {p.sum()!r}, not 1")
        k = np.arange(p.size)
        mean = float(k @ p)
        if abs(mean - 1.0) > _TOL:
            raise ValueError(f"offspring mean is {mean!r}, not critical")
        rho2 = float((k - 1.0) ** 2 @ p)
        if rho2 <= 0:
            raise ValueError("degenerate offspring law (zero variance)")
        self.pmf = p
        self.pmf.setflags(write=False)
        self.rho2 = rho2
        self.rho = math.sqrt(rho2)
        self.max_children = int(p.size - 1)
        self._accept, self._alias = build_alias(p)

    @classmethod
    def geometric(cls) -> "OffspringDist":
        """Geometric(1/2): mu(k) = 2^-(k+1); the critical member of the family.

        Support truncated where the cumulative tail drops below 1e-15; the
        truncated mass is ~9e-16 and stays inside the validation tolerances.
        """
        k_max = 1
        while 0.5**(k_max + 1) >= _GEOMETRIC_TAIL:
            k_max += 1
        k = np.arange(k_max + 1)
        return cls(0.5 ** (k + 1.0))

    @classmethod
    def binary(cls) -> "OffspringDist":
        """mu(0) = mu(2) = 1/2 (periodic: progeny sizes are odd)."""
        return cls([0.5, 0.0, 0.5])

    @classmethod
    def from_pmf(cls, pmf) -> "OffspringDist":
        return cls(pmf)

    @property
    def mean(self) -> float:
        return float(np.arange(self.pmf.size) @ self.pmf)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.pmf > 0)

    @property
    def is_aperiodic(self) -> bool:
        """True when the support generates Z (gcd of nonzero support is 1)."""
        nz = [int(v) for v in self.support if v > 0]
        return reduce(math.gcd, nz, 0) == 1

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` iid child counts (alias method)."""
        m = self.pmf.size
        idx = rng.integers(0, m, size=size)
        u = rng.random(size)
        return np.where(u < self._accept[idx], idx, self._alias[idx])

    def alias_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """(accept, alias) arrays for kernel-side sampling; index = count."""
        return self._accept, self._alias

    def __repr__(self) -> str:
        return f"OffspringDist(K={self.max_children}, rho2={self.rho2:.6g})"


@dataclass(frozen=True, eq=False)
class PlaneTree:
    """Rooted ordered tree encoded by DFS child counts.

    ``parent`` and ``height`` are derived on construction; the Lukasiewicz
    partial-sum property is asserted exactly.
    """

    child_counts: np.ndarray
    parent: np.ndarray = field(repr=False, default=None)
    height: np.ndarray = field(repr=False, default=None)

    def __init__(self, child_counts):
        counts = np.ascontiguousarray(child_counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("child_counts must be a nonempty 1-d sequence")
        if np.any(counts < 0):
            raise ValueError("negative child count")
        walk = np.cumsum(counts - 1)
        if walk[-1] != -1 or (counts.size > 1 and walk[:-1].min() < 0):
            raise ValueError("not a Lukasiewicz sequence")
        parent, height = parent_height_from_counts(counts)
        for a in (counts, parent, height):
            a.setflags(write=False)
        object.__setattr__(self, "child_counts", counts)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "height", height)

    @property
    def n(self) -> int:
        return self.child_counts.size

    def __len__(self) -> int:
        return self.n


def sample_gw_unconditioned(mu: OffspringDist, cap: int,
                            rng: np.random.Generator):
    """One Galton-Watson tree under Pi_mu restricted to {#T <= cap}.

    Returns a PlaneTree, or CapExceeded(cap) when DFS generation would pass
    ``cap`` vertices (partial output is discarded).
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    chunks = []
    open_slots = 1
    total = 0
    chunk_len = 256
    while True:
        want = min(chunk_len, cap - total + 1)
        counts = mu.sample(rng, want)
        walk = open_slots + np.cumsum(counts - 1)
        hit = np.flatnonzero(walk == 0)
        if hit.size:
            chunks.append(counts[: hit[0] + 1])
            if total + hit[0] + 1 > cap:
                return CapExceeded(cap)
            return PlaneTree(np.concatenate(chunks))
        total += want
        if total > cap:
            return CapExceeded(cap)
        chunks.append(counts)
        open_slots = int(walk[-1])
        chunk_len = min(2 * chunk_len, 1 << 16)


def _reachable_total(mu: OffspringDist, n: int) -> bool:
    """Whether Pi_mu(#T = n) > 0, i.e. n-1 is a sum of nonzero support values."""
    if n < 1:
        return False
    target = n - 1
    if target == 0:
        return bool(mu.pmf[0] > 0)
    sup = [int(v) for v in mu.support if v > 0]
    g = reduce(math.gcd, sup, 0)
    if target % g != 0:
        return False
    k_max = max(sup)
    bound = k_max * k_max  # beyond the Frobenius range every multiple of g works
    if target > bound:
        return True
    reach = np.zeros(target + 1, dtype=bool)
    reach[0] = True
    for v in sup:
        for s in range(v, target + 1):
            if reach[s - v]:
                reach[s] = True
    return bool(reach[target])


def sample_gw_conditioned(mu: OffspringDist, n: int,
                          rng: np.random.Generator) -> PlaneTree:
    """One tree under Pi_mu( . | #T = n), exactly.

    Child-count multiplicities are drawn as Multinomial(n, mu) rejected until
    the total number of children equals n-1, arranged uniformly at random and
    rotated to the unique first-passage (cycle lemma) representative.
    """
    if not _reachable_total(mu, n):
        raise UnreachableSize(f"Pi_mu(#T = {n}) = 0")
    if n == 1:
        return PlaneTree(np.zeros(1, dtype=np.int64))
    values = np.arange(mu.pmf.size)
    # acceptance probability ~ 1/(rho * sqrt(2 pi n)); size batches accordingly
    batch = int(min(4096, max(16, 2.0 * mu.rho * math.sqrt(2 * math.pi * n))))
    while True:
        mat = rng.multinomial(n, mu.pmf, size=batch)
        ok = np.flatnonzero(mat @ values == n - 1)
        if ok.size:
            multiplicities = mat[ok[0]]
            break
    seq = rng.permutation(np.repeat(values, multiplicities))
    walk = np.cumsum(seq - 1)
    first_min = int(np.argmin(walk))
    return PlaneTree(np.roll(seq, -(first_min + 1)))


def total_progeny_pmf(mu: OffspringDist, n_max: int) -> np.ndarray:
    """Exact Pi_mu(#T = n) for n = 1..n_max via the Otter-Dwass identity.

    Pi_mu(#T = n) = P(S_n = -1)/n where S has iid steps nu(k) = mu(k+1);
    the step law distribution is powered by direct convolution, trimming
    float-underflowed tails (exact zeros) to keep the support window small.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    out = np.zeros(n_max)
    dist = np.ones(1)
    lo = 0  # dist[i] = P(S = lo + i)
    for n in range(1, n_max + 1):
        dist = np.convolve(dist, mu.pmf)
        lo -= 1
        nz = np.flatnonzero(dist)
        dist = dist[nz[0]: nz[-1] + 1]
        lo += int(nz[0])
        idx = -1 - lo
        if 0 <= idx < dist.size:
            out[n - 1] = dist[idx] / n
    return out


def kemperman_ratio(mu: OffspringDist, k: int) -> float:
    """k^{3/2} Pi_mu(#T = k) rho sqrt(2 pi); tends to 1 for aperiodic mu."""
    if not mu.is_aperiodic:
        raise PeriodicOffspring(
            "offspring support generates a strict subgroup of Z")
    if k < 1:
        raise ValueError("k must be >= 1")
    pk = total_progeny_pmf(mu, k)[k - 1]
    return float(k**1.5 * pk * mu.rho * math.sqrt(2 * math.pi))


def mrca_and_distance(tree: PlaneTree, i: int, j: int) -> tuple[int, int]:
    """Height of the most recent common ancestor and the graph distance.

    distance(i, j) = height[i] + height[j] - 2 * mrca_height.
    """
    n = tree.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("vertex index out of range")
    hi, hj = int(tree.height[i]), int(tree.height[j])
    a, b = i, j
    while tree.height[a] > tree.height[b]:
        a = tree.parent[a]
    while tree.height[b] > tree.height[a]:
        b = tree.parent[b]
    while a != b:
        a = tree.parent[a]
        b = tree.parent[b]
    mrca_h = int(tree.height[a])
    return mrca_h, hi + hj - 2 * mrca_h


def distance_profile(tree: PlaneTree, k_max: int) -> np.ndarray:
    """Counts of ordered vertex pairs at each graph distance k = 0..k_max."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    n = tree.n
    degree = np.zeros(n, dtype=np.int64)
    np.add.at(degree, tree.parent[1:], 1)
    degree[1:] += 1  # edge to parent
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=offsets[1:])
    neighbors = np.empty(offsets[-1], dtype=np.int64)
    cursor = offsets[:-1].copy()
    for v in range(1, n):
        p = int(tree.parent[v])
        neighbors[cursor[p]] = v
        cursor[p] += 1
        neighbors[cursor[v]] = p
        cursor[v] += 1
    return pair_distance_counts(offsets, neighbors, k_max)
