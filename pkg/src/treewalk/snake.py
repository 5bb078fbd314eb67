"""Discretized Brownian snake under the duration-1 excursion law.

The lifetime is a random-walk bridge turned into an excursion by the Vervaat
rotation; the head path is regrown segment-by-segment with Brownian-bridge
cuts, so that conditionally on the excursion the heads are exactly Gaussian
with Cov(head_i, head_j) = min of the excursion over the grid interval.
Occupation statistics (grid histogram, support volume, density estimates)
summarize one snake's head path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import snake_evolve

__all__ = [
    "ExcursionPath",
    "OccupationGrid",
    "SnakeSample",
    "default_bandwidth",
    "density_at",
    "evolve_head",
    "occupation_grid",
    "sample_excursion",
]


@dataclass(frozen=True, eq=False)
class ExcursionPath:
    """Nonnegative path on the grid t_i = i/m with zero endpoints."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("need at least 3 grid values")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("endpoints must be exactly 0")
        if np.any(v < 0):
            raise ValueError("excursion must be nonnegative")
        if v.max() <= 0:
            raise ValueError("excursion must be positive somewhere")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.size - 1

    def grid_min(self, i: int, j: int) -> float:
        """min of the excursion over grid indices [min(i,j), max(i,j)]."""
        lo, hi = (i, j) if i <= j else (j, i)
        return float(self.values[lo: hi + 1].min())


@dataclass(frozen=True, eq=False)
class SnakeSample:
    """One snake: the driving excursion and the head position per grid time."""

    excursion: ExcursionPath
    heads: np.ndarray  # (m+1, d) float64

    @property
    def d(self) -> int:
        return self.heads.shape[1]

    def save_heads(self, path) -> None:
        """Dump the head path as a binary float array (.npy)."""
        np.save(path, self.heads)


def sample_excursion(m: int, rng: np.random.Generator) -> ExcursionPath:
    """Duration-1 excursion: +-1 bridge of m steps, Vervaat rotation, /sqrt(m).

    m must be even (a +-1 walk bridges to zero only in an even number of
    steps); acceptance-scale grids are even.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if m % 2:
        raise ValueError("m must be even for a +-1 bridge")
    steps = np.concatenate([np.ones(m // 2, dtype=np.int64),
                            -np.ones(m // 2, dtype=np.int64)])
    steps = rng.permutation(steps)
    walk = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(steps, out=walk[1:])
    k = int(np.argmin(walk[:m]))  # first minimum over one period
    rotated = np.empty(m + 1, dtype=np.int64)
    idx = (k + np.arange(m + 1)) % m
    rotated[:] = walk[idx] - walk[k]
    rotated[m] = 0
    return ExcursionPath(rotated / math.sqrt(m))


def evolve_head(excursion: ExcursionPath, d: int,
                rng: np.random.Generator) -> SnakeSample:
    """Grow the snake head along the excursion with unit-variance increments.

    Conditionally on the excursion, each head coordinate is centered Gaussian
    and Cov(head_s, head_t) equals the excursion minimum over [s, t] on the
    grid; truncation cuts inside stored segments draw the Brownian-bridge
    value, which is what makes the covariance exact.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    m = excursion.m
    normals = rng.standard_normal((2 * m + 2, d))
    heads = np.empty((m + 1, d))
    snake_evolve(excursion.values, normals, heads)
    heads.setflags(write=False)
    return SnakeSample(excursion, heads)


@dataclass(frozen=True, eq=False)
class OccupationGrid:
    """Histogram of the occupation measure on cells of width h."""

    cells: np.ndarray   # (k, d) int64 cell indices (floor(head / h))
    masses: np.ndarray  # (k,) float64, sums to 1
    h: float
    d: int

    @property
    def support_volume(self) -> float:
        """h^d times the number of occupied cells."""
        return self.h ** self.d * self.cells.shape[0]

    def mass_at(self, y) -> float:
        cell = np.floor(np.asarray(y, dtype=np.float64) / self.h).astype(np.int64)
        match = np.all(self.cells == cell, axis=1)
        hit = np.flatnonzero(match)
        return float(self.masses[hit[0]]) if hit.size else 0.0

    def density_at(self, y) -> float:
        return self.mass_at(y) / self.h ** self.d

    def to_csv(self, path) -> None:
        """Rows 'c_1,...,c_d,mass', one occupied cell per line."""
        with open(path, "w") as fh:
            fh.write(",".join(f"c{j+1}" for j in range(self.d)) + ",mass\n")
            for cell, mass in zip(self.cells, self.masses):
                fh.write(",".join(str(int(c)) for c in cell)
                         + f",{float(mass)!r}\n")


def occupation_grid(heads: np.ndarray, h: float) -> OccupationGrid:
    """Grid histogram of one snake's occupation measure.

    Each of the m heads at t_1..t_m carries weight 1/m, so the histogram has
    total mass exactly 1; the support-volume estimate is h^d per occupied
    cell.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    pts = np.asarray(heads, dtype=np.float64)
    m = pts.shape[0] - 1
    d = pts.shape[1]
    cells = np.floor(pts[1:] / h).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    cells = cells[order]
    boundary = np.ones(m, dtype=bool)
    boundary[1:] = np.any(cells[1:] != cells[:-1], axis=1)
    starts = np.flatnonzero(boundary)
    uniq = cells[starts]
    counts = np.diff(np.append(starts, m))
    return OccupationGrid(uniq, counts / m, float(h), d)


def density_at(heads: np.ndarray, y, h: float) -> float:
    """Box-kernel density estimate at y: cell mass divided by h^d."""
    return occupation_grid(heads, h).density_at(y)


def default_bandwidth(m: int) -> float:
    """Heuristic cell width m^{-1/4}; no principled choice is available."""
    return float(m) ** -0.25
