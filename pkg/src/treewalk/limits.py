"""Closed-form limit objects: kernels, densities and constants.

The two-point local-time kernel is a triple integral over branch lengths of
a three-Gaussian overlap; the overlap is reduced in closed form with the
Gaussian product rule, leaving a 3-d integral evaluated by adaptive
quadrature on a compactified cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .gw_trees import OffspringDist
from .lattice import GaussianKernel, JumpDist

__all__ = [
    "LimitContext",
    "QuadratureNotConverged",
    "hitting_constant",
    "ito_weight",
    "phi",
    "three_point_kernel",
    "three_point_kernel_heights",
    "triple_density_mass",
    "triple_point_density",
    "visit_limit_constant",
]


class QuadratureNotConverged(RuntimeError):
    """Adaptive quadrature missed the requested tolerance."""

    def __init__(self, value: float, achieved: float, requested: float):
        super().__init__(
            f"quadrature error {achieved:.3g} exceeds requested {requested:.3g}")
        self.value = value
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True, eq=False)
class LimitContext:
    """Dimension, offspring variance and jump covariance feeding the limits.

    sigma = (det M)^(1/2d) and c = sqrt(rho/2)/sigma.
    """

    d: int
    rho2: float
    M: np.ndarray

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("limit formulas require d in {1, 2, 3}")
        if self.rho2 <= 0:
            raise ValueError("rho2 must be positive")
        M = np.atleast_2d(np.asarray(self.M, dtype=np.float64))
        np.linalg.cholesky(M)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "_kernel", GaussianKernel(M))

    @classmethod
    def from_laws(cls, mu: OffspringDist, theta: JumpDist) -> "LimitContext":
        return cls(theta.d, mu.rho2, theta.M)

    @property
    def rho(self) -> float:
        return math.sqrt(self.rho2)

    @property
    def sigma(self) -> float:
        return float(np.linalg.det(self.M)) ** (1.0 / (2 * self.d))

    @property
    def c(self) -> float:
        return math.sqrt(self.rho / 2.0) / self.sigma

    def kernel(self) -> GaussianKernel:
        return self._kernel


def three_point_kernel(ctx: LimitContext, r1: float, r2: float, r3: float,
                       x, y) -> float:
    """Closed form of the z-integral of p_r1(z) p_r2(x-z) p_r3(y-z).

    Two applications of the Gaussian product rule give
    p_{r1+r2}(x) * p_{r3 + r1 r2/(r1+r2)}(y - r1/(r1+r2) x).
    """
    if min(r1, r2, r3) < 0:
        raise ValueError("branch lengths must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = ctx.kernel()
    t12 = r1 + r2
    s = r1 * r2 / t12
    return float(p(t12, x) * p(r3 + s, y - (r1 / t12) * x))


def three_point_kernel_heights(ctx: LimitContext, u: float, v: float,
                               w: float, x, y) -> float:
    """Same kernel in height coordinates (two vertex heights u, v and their
    common-ancestor height w < min(u, v))."""
    if not 0 < w < min(u, v):
        raise ValueError("need 0 < w < min(u, v)")
    return three_point_kernel(ctx, w, u - w, v - w, x, y)


def _cube_map(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map (0,1) -> (0,inf) by r = s/(1-s); returns (r, dr/ds)."""
    r = s / (1.0 - s)
    jac = 1.0 / (1.0 - s) ** 2
    return r, jac


def phi(ctx: LimitContext, x, y, rel_tol: float = 1e-6) -> float:
    """Two-point local-time limit kernel.

    rho^4 * int over (R_+)^3 of (r1+r2+r3) exp(-rho^2 (r1+r2+r3)^2 / 2)
    times the three-point kernel at (r1, r2, r3, x, y).  The positive octant
    is compactified to the unit cube and integrated by nested adaptive
    Gauss-Kronrod quadrature.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != ctx.d or y.size != ctx.d:
        raise ValueError("x, y must have dimension ctx.d")
    if not np.any(x) or not np.any(y):
        raise ValueError("kernel is only evaluated away from the origin")
    rho2 = ctx.rho2
    p = ctx.kernel()

    def integrand(s1, s2, s3):
        r1, j1 = _cube_map(np.float64(s1))
        r2, j2 = _cube_map(np.float64(s2))
        r3, j3 = _cube_map(np.float64(s3))
        total = r1 + r2 + r3
        weight = rho2 * rho2 * total * math.exp(-0.5 * rho2 * total * total)
        t12 = r1 + r2
        if t12 <= 0 or r3 + r1 * r2 / t12 <= 0:
            return 0.0
        overlap = p(t12, x) * p(r3 + r1 * r2 / t12, y - (r1 / t12) * x)
        return weight * float(overlap) * j1 * j2 * j3

    opts = {"epsabs": 1e-15, "epsrel": rel_tol / 20.0, "limit": 200}
    value, err = integrate.nquad(integrand, [(0, 1)] * 3,
                                 opts=[opts, opts, opts])
    if err > max(rel_tol * abs(value), 1e-13):
        raise QuadratureNotConverged(value, err, rel_tol * abs(value))
    return float(value)


def triple_point_density(r1: float, r2: float, r3: float) -> float:
    """Joint density 16 s exp(-2 s^2), s = r1+r2+r3, of the branch triple
    (common-ancestor height, two height overshoots) for two uniform times of
    a normalized excursion."""
    if min(r1, r2, r3) < 0:
        return 0.0
    s = r1 + r2 + r3
    return 16.0 * s * math.exp(-2.0 * s * s)


def triple_density_mass(rel_tol: float = 1e-8) -> float:
    """Total mass of triple_point_density over (R_+)^3 (should be 1)."""

    def integrand(s1, s2, s3):
        r1, j1 = _cube_map(np.float64(s1))
        r2, j2 = _cube_map(np.float64(s2))
        r3, j3 = _cube_map(np.float64(s3))
        return triple_point_density(r1, r2, r3) * j1 * j2 * j3

    opts = {"epsabs": 1e-13, "epsrel": rel_tol / 4.0, "limit": 200}
    value, err = integrate.nquad(integrand, [(0, 1)] * 3,
                                 opts=[opts, opts, opts])
    if err > max(rel_tol * abs(value), 1e-12):
        raise QuadratureNotConverged(value, err, rel_tol * abs(value))
    return float(value)


def hitting_constant(d: int, x, y) -> float:
    """(2 - d/2) |x - y|^{-2}: snake-excursion mass hitting y from x."""
    if d not in (1, 2, 3):
        raise ValueError("d must be in {1, 2, 3}")
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    n2 = float(diff @ diff) if diff.ndim else float(diff * diff)
    if n2 == 0:
        raise ValueError("x and y must differ")
    return (2.0 - d / 2.0) / n2


def visit_limit_constant(ctx: LimitContext) -> float:
    """Limit of |M^{-1/2}a|^2 P(a visited): 2(4-d)/rho^2."""
    return 2.0 * (4 - ctx.d) / ctx.rho2


def ito_weight(r: float) -> float:
    """Excursion-duration weight 1/(2 sqrt(2 pi r^3))."""
    if r <= 0:
        raise ValueError("r must be positive")
    return 1.0 / (2.0 * math.sqrt(2.0 * math.pi * r**3))
