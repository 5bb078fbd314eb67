"""Jump laws on Z^d, exact convolution powers and local-CLT deviations.

Only finitely supported laws are admitted, so the fourth-moment condition on
the tails holds automatically and convolution powers are exact (up to float
rounding) on a large enough box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from ._rng import build_alias

__all__ = [
    "ConvolutionPower",
    "GaussianKernel",
    "JumpDist",
    "PeriodicJump",
    "conv_power",
    "llt_deviation",
    "sample_jump",
]

_TOL = 1e-12


class PeriodicJump(ValueError):
    """Return times of the walk lie in a strict subgroup of Z."""


def _lattice_index(vectors) -> int:
    """Index in Z^d of the sublattice spanned by integer row vectors.

    Returns 0 when the span has rank < d.  Computed by fraction-free integer
    elimination (Hermite-style) with exact Python ints.
    """
    rows = [[int(x) for x in v] for v in vectors]
    d = len(rows[0]) if rows else 0
    det = 1
    h = 0
    for col in range(d):
        while True:
            pivots = [r for r in range(h, len(rows)) if rows[r][col] != 0]
            if not pivots:
                return 0
            r0 = min(pivots, key=lambda r: abs(rows[r][col]))
            rows[h], rows[r0] = rows[r0], rows[h]
            done = True
            for r in range(h + 1, len(rows)):
                if rows[r][col] != 0:
                    q = rows[r][col] // rows[h][col]
                    rows[r] = [a - q * b for a, b in zip(rows[r], rows[h])]
                    if rows[r][col] != 0:
                        done = False
            if done:
                break
        det *= abs(rows[h][col])
        h += 1
    return det


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    """Density p_t(x) = (2 pi t)^{-d/2} (det M)^{-1/2} exp(-x.M^{-1}x / 2t)."""

    M: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=np.float64))
        np.linalg.cholesky(M)  # raises unless symmetric positive definite
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "_Minv", np.linalg.inv(M))
        object.__setattr__(self, "_det", float(np.linalg.det(M)))

    @property
    def d(self) -> int:
        return self.M.shape[0]

    def __call__(self, t: float, x) -> np.ndarray:
        """Evaluate p_t at points x of shape (..., d); t > 0."""
        if t <= 0:
            raise ValueError("t must be positive")
        x = np.asarray(x, dtype=np.float64)
        q = np.einsum("...i,ij,...j->...", x, self._Minv, x)
        log_p = (-0.5 * self.d * math.log(2 * math.pi * t)
                 - 0.5 * math.log(self._det) - q / (2.0 * t))
        return np.exp(log_p)


class JumpDist:
    """Finitely supported centered jump law on Z^d.

    Requires: probabilities sum to 1, mean exactly 0 (both within 1e-12),
    positive definite covariance, and support generating Z^d as a group.
    """

    def __init__(self, points, probs):
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        p = np.asarray(probs, dtype=np.float64)
        if pts.shape[0] != p.size:
            raise ValueError("points/probs length mismatch")
        d = pts.shape[1]
        if not 1 <= d <= 4:
            raise ValueError("dimension must be 1..4")
        if len({tuple(row) for row in pts}) != pts.shape[0]:
            raise ValueError("duplicate support points")
        if np.any(p < 0):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > _TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        live = p > 0
        mean = p @ pts
        if np.max(np.abs(mean)) > _TOL:
            raise ValueError(f"jump law mean {mean} is not zero")
        M = np.einsum("k,ki,kj->ij", p, pts.astype(float), pts.astype(float))
        np.linalg.cholesky(M)  # must be positive definite
        if _lattice_index(pts[live]) != 1:
            raise ValueError("support does not generate Z^d as a group")
        self.points = pts
        self.probs = p
        self.points.setflags(write=False)
        self.probs.setflags(write=False)
        self.d = d
        self.M = M
        self.M.setflags(write=False)
        self.sigma = float(np.linalg.det(M)) ** (1.0 / (2 * d))
        # period of return times = index of the difference lattice in Z^d
        diffs = pts[live] - pts[live][0]
        self.period = _lattice_index(diffs[1:]) if diffs.shape[0] > 1 else 0
        self.is_aperiodic = self.period == 1
        self.max_radius = int(np.max(np.abs(pts)))
        self._accept, self._alias = build_alias(p)
        self._kernel = GaussianKernel(M)

    # ---------------------------------------------------------- constructors

    @classmethod
    def lazy(cls, d: int) -> "JumpDist":
        """Lazy simple walk: stay with prob 1/2, else one unit step (M = I/2d)."""
        pts = [[0] * d]
        probs = [0.5]
        for i in range(d):
            for s in (1, -1):
                v = [0] * d
                v[i] = s
                pts.append(v)
                probs.append(0.5 / (2 * d))
        return cls(pts, probs)

    @classmethod
    def box_uniform(cls, d: int) -> "JumpDist":
        """Uniform on {-1,0,1}^d minus the center."""
        pts = [v for v in product((-1, 0, 1), repeat=d) if any(v)]
        return cls(pts, [1.0 / len(pts)] * len(pts))

    @classmethod
    def from_pmf(cls, points, probs) -> "JumpDist":
        return cls(points, probs)

    # --------------------------------------------------------- serialization

    def to_text(self) -> str:
        """One support atom per line: 'x_1 ... x_d prob'."""
        lines = []
        for pt, pr in zip(self.points, self.probs):
            lines.append(" ".join(str(int(c)) for c in pt) + f" {float(pr)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "JumpDist":
        points, probs = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            points.append([int(c) for c in parts[:-1]])
            probs.append(float(parts[-1]))
        return cls(points, probs)

    # -------------------------------------------------------------- sampling

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """iid jumps, shape (size, d)."""
        m = self.probs.size
        idx = rng.integers(0, m, size=size)
        u = rng.random(size)
        idx = np.where(u < self._accept[idx], idx, self._alias[idx])
        return self.points[idx]

    def alias_tables(self) -> tuple[np.ndarray, np.ndarray]:
        return self._accept, self._alias

    def gaussian(self) -> GaussianKernel:
        return self._kernel

    def __repr__(self) -> str:
        return (f"JumpDist(d={self.d}, atoms={self.probs.size}, "
                f"sigma={self.sigma:.6g})")


def sample_jump(theta: JumpDist, rng: np.random.Generator,
                size: int | None = None) -> np.ndarray:
    """One jump (or ``size`` of them) distributed according to theta."""
    out = theta.sample(rng, 1 if size is None else size)
    return out[0] if size is None else out


@dataclass(frozen=True, eq=False)
class ConvolutionPower:
    """Exact k-step transition probabilities on the centered box."""

    probs: np.ndarray  # shape (2*box+1,)*d, index a + box per axis
    box: int
    k: int
    escaped_mass: float

    def at(self, a) -> float:
        idx = tuple(int(c) + self.box for c in np.atleast_1d(a))
        return float(self.probs[idx])


def conv_power(theta: JumpDist, k: int, box: int) -> ConvolutionPower:
    """pi_k = theta^{*k} restricted to [-box, box]^d.

    Mass stepping outside the box is dropped and reported as escaped_mass;
    with box >= k * max support radius nothing escapes and the result is
    exact up to float rounding.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if box < 1:
        raise ValueError("box must be >= 1")
    d = theta.d
    side = 2 * box + 1
    arr = np.zeros((side,) * d)
    arr[(box,) * d] = 1.0
    for _ in range(k):
        new = np.zeros_like(arr)
        for pt, pr in zip(theta.points, theta.probs):
            if pr == 0:
                continue
            dst = tuple(slice(max(0, v), side + min(0, v)) for v in pt)
            src = tuple(slice(max(0, -v), side + min(0, -v)) for v in pt)
            new[dst] += pr * arr[src]
        arr = new
    escaped = max(0.0, 1.0 - float(arr.sum()))
    return ConvolutionPower(arr, box, k, escaped)


def llt_deviation(theta: JumpDist, n: int) -> float:
    """sup_a (1 + |a|^2/n) n^{d/2} |pi_n(a) - p_n(a)| over the exact box."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not theta.is_aperiodic:
        raise PeriodicJump(f"walk period is {theta.period}")
    box = n * theta.max_radius
    pi_n = conv_power(theta, n, box)
    axes = np.arange(-box, box + 1, dtype=np.float64)
    grids = np.meshgrid(*([axes] * theta.d), indexing="ij")
    coords = np.stack(grids, axis=-1)
    p_n = theta.gaussian()(float(n), coords)
    norm2 = sum(g * g for g in grids)
    dev = (1.0 + norm2 / n) * n ** (theta.d / 2.0) * np.abs(pi_n.probs - p_n)
    return float(dev.max())
