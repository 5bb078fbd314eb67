"""Tree-indexed random walks: locations, local times, range, hitting, BRW.

A spatial tree assigns a lattice location to every vertex of a plane tree:
the root sits at the origin and every edge carries an iid jump.  The heavy
experiments (hitting probabilities, branching-random-walk unions) generate
unconditioned trees vertex by vertex inside numba kernels with per-trial
xoshiro streams; conditioned-tree sweeps use per-trial Philox generators.
Either way trial -> stream is a pure function of (master seed, trial index),
so results never depend on worker count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._kernels import accumulate_locations, dfs_hit_chunk, dfs_spatial_collect
from ._parallel import map_trials
from ._rng import derive_seed, trial_generator, xoshiro_states
from .gw_trees import OffspringDist, PlaneTree, sample_gw_conditioned
from .lattice import JumpDist

__all__ = [
    "HitEstimate",
    "IdentityCheck",
    "LocalTimeField",
    "MomentEstimate",
    "SpatialTree",
    "TrialValues",
    "VisitedSites",
    "assign_locations",
    "brw_hit_identity_check",
    "brw_visited",
    "estimate_hitting_prob",
    "local_time_field",
    "local_time_moment",
    "scaled_range_sample",
]


@dataclass(frozen=True, eq=False)
class SpatialTree:
    """A plane tree with a Z^d location per vertex (root at the origin)."""

    tree: PlaneTree
    locations: np.ndarray  # (n, d) int64

    @property
    def d(self) -> int:
        return self.locations.shape[1]


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Visit counts per lattice site; the key count is the range."""

    counts: dict
    n: int

    @property
    def range(self) -> int:
        return len(self.counts)

    def __getitem__(self, site) -> int:
        return self.counts.get(tuple(int(c) for c in np.atleast_1d(site)), 0)


@dataclass(frozen=True)
class HitEstimate:
    """Hitting-probability estimate with cap diagnostics."""

    p_hat: float
    se: float
    capped_fraction: float
    trials: int
    hits: int
    capped: int
    cap: int
    tail_bound_estimate: float  # asymptotic P(#T > cap), cap-bias scale


@dataclass(frozen=True, eq=False)
class IdentityCheck:
    """Both sides of the p-particle hitting identity with a z statistic."""

    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    z: float
    p_single: float
    lhs_hits: np.ndarray  # per-trial union-hit indicators
    rhs_hits: np.ndarray  # per-trial single-tree indicators


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float
    trials: int


@dataclass(frozen=True, eq=False)
class TrialValues:
    """Per-trial statistics plus wall-clock runtimes."""

    values: np.ndarray
    runtime_ns: np.ndarray


@dataclass(frozen=True, eq=False)
class VisitedSites:
    """The set of sites visited by a branching random walk."""

    points: np.ndarray  # (k, d) int64, lexicographically sorted

    def __len__(self) -> int:
        return self.points.shape[0]

    def save(self, path) -> None:
        """Dump as a binary coordinate list (.npy)."""
        np.save(path, self.points)


# ------------------------------------------------------------------ packing

def _pack_params(d: int) -> tuple[int, int]:
    """(shift, offset): coordinates with |x| <= offset pack into one int64."""
    shift = 21 if d <= 3 else 15
    return shift, (1 << (shift - 1)) - 1


def pack_locations(locations: np.ndarray) -> np.ndarray:
    """Pack (n, d) integer coordinates into distinct int64 keys."""
    d = locations.shape[1]
    shift, offset = _pack_params(d)
    if locations.size and int(np.abs(locations).max()) > offset:
        raise OverflowError("coordinates exceed the packable box")
    keys = np.zeros(locations.shape[0], dtype=np.int64)
    for j in range(d):
        keys = (keys << shift) | (locations[:, j] + offset)
    return keys


def unpack_keys(keys: np.ndarray, d: int) -> np.ndarray:
    shift, offset = _pack_params(d)
    mask = (1 << shift) - 1
    out = np.empty((keys.size, d), dtype=np.int64)
    work = keys.copy()
    for j in range(d - 1, -1, -1):
        out[:, j] = (work & mask) - offset
        work >>= shift
    return out


# --------------------------------------------------------------- operations

def assign_locations(tree: PlaneTree, theta: JumpDist,
                     rng: np.random.Generator) -> SpatialTree:
    """Attach iid theta-distributed edge increments along the DFS order."""
    n = tree.n
    locations = np.empty((n, theta.d), dtype=np.int64)
    if n > 1:
        increments = theta.sample(rng, n - 1)
        accumulate_locations(tree.parent, increments, locations)
    else:
        locations[0] = 0
    locations.setflags(write=False)
    return SpatialTree(tree, locations)


def local_time_field(spatial: SpatialTree) -> LocalTimeField:
    """Exact visit counts L_n(a) for every visited site a."""
    keys = pack_locations(spatial.locations)
    uniq, counts = np.unique(keys, return_counts=True)
    pts = unpack_keys(uniq, spatial.d)
    mapping = {tuple(int(c) for c in pt): int(k) for pt, k in zip(pts, counts)}
    return LocalTimeField(mapping, spatial.tree.n)


def range_of(spatial: SpatialTree) -> int:
    """Number of distinct visited sites."""
    return int(np.unique(pack_locations(spatial.locations)).size)


# ------------------------------------------------- conditioned-tree sweeps

def _range_chunk(common, lo, hi):
    mu, theta, n, seed = common
    scale = float(n) ** (-theta.d / 4.0)
    values = np.empty(hi - lo)
    runtimes = np.empty(hi - lo, dtype=np.int64)
    for t in range(lo, hi):
        t0 = time.perf_counter_ns()
        rng = trial_generator(seed, t)
        tree = sample_gw_conditioned(mu, n, rng)
        spatial = assign_locations(tree, theta, rng)
        values[t - lo] = scale * range_of(spatial)
        runtimes[t - lo] = time.perf_counter_ns() - t0
    return {"values": values, "runtime_ns": runtimes}


def scaled_range_sample(mu: OffspringDist, theta: JumpDist, n: int,
                        trials: int, seed: int,
                        workers: int = 1) -> TrialValues:
    """iid sample of n^{-d/4} R_n over conditioned trees of n vertices."""
    out = map_trials(_range_chunk, (mu, theta, n, seed), trials, workers)
    return TrialValues(out["values"], out["runtime_ns"])


def _moment_chunk(common, lo, hi):
    mu, theta, n, x_n, y_n, seed = common
    scale = float(n) ** (theta.d / 2.0 - 2.0)
    values = np.empty(hi - lo)
    runtimes = np.empty(hi - lo, dtype=np.int64)
    for t in range(lo, hi):
        t0 = time.perf_counter_ns()
        rng = trial_generator(seed, t)
        tree = sample_gw_conditioned(mu, n, rng)
        spatial = assign_locations(tree, theta, rng)
        lx = int(np.all(spatial.locations == x_n, axis=1).sum())
        ly = int(np.all(spatial.locations == y_n, axis=1).sum())
        values[t - lo] = scale * lx * ly
        runtimes[t - lo] = time.perf_counter_ns() - t0
    return {"values": values, "runtime_ns": runtimes}


def local_time_moment(mu: OffspringDist, theta: JumpDist, n: int, x_n, y_n,
                      trials: int, seed: int,
                      workers: int = 1) -> tuple[MomentEstimate, TrialValues]:
    """Monte Carlo estimate of n^{d/2-2} E[L_n(x_n) L_n(y_n)].

    Both targets must be nonzero lattice points.
    """
    x_n = np.asarray(x_n, dtype=np.int64)
    y_n = np.asarray(y_n, dtype=np.int64)
    if not x_n.any() or not y_n.any():
        raise ValueError("targets must be nonzero")
    out = map_trials(_moment_chunk, (mu, theta, n, x_n, y_n, seed),
                     trials, workers)
    values = out["values"]
    est = MomentEstimate(float(values.mean()),
                         float(values.std(ddof=1) / math.sqrt(values.size)),
                         trials)
    return est, TrialValues(values, out["runtime_ns"])


# --------------------------------------------- unconditioned hitting kernels

def _hit_chunk(common, lo, hi):
    mu, theta, target, cap, trees_per_trial, seed = common
    states = xoshiro_states(seed, lo, hi)
    mu_accept, mu_alias = mu.alias_tables()
    th_accept, th_alias = theta.alias_tables()
    t0 = time.perf_counter_ns()
    hit, capped = dfs_hit_chunk(states, mu_accept, mu_alias, th_accept,
                                th_alias, theta.points, target, cap,
                                trees_per_trial, max(1, mu.max_children))
    per = (time.perf_counter_ns() - t0) // max(1, hi - lo)
    return {"hit": hit, "capped": capped,
            "runtime_ns": np.full(hi - lo, per, dtype=np.int64)}


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def estimate_hitting_prob(mu: OffspringDist, theta: JumpDist, a, cap: int,
                          trials: int, seed: int, workers: int = 1,
                          ) -> tuple[HitEstimate, TrialValues]:
    """Fraction of unconditioned spatial trees visiting ``a`` before cap.

    Trees passing the vertex cap without visiting ``a`` count as non-hits;
    their fraction is reported separately as the cap-bias diagnostic, next
    to the asymptotic tail estimate 2/(rho sqrt(2 pi cap)) for P(#T > cap).
    """
    target = np.asarray(a, dtype=np.int64).reshape(-1)
    if target.size != theta.d:
        raise ValueError("target dimension mismatch")
    if not target.any():
        raise ValueError("target must be nonzero")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    out = map_trials(_hit_chunk, (mu, theta, target, cap, 1, seed),
                     trials, workers)
    hits = int(out["hit"].sum())
    capped = int(out["capped"].sum())
    p_hat = hits / trials
    est = HitEstimate(
        p_hat=p_hat,
        se=_binomial_se(p_hat, trials),
        capped_fraction=capped / trials,
        trials=trials,
        hits=hits,
        capped=capped,
        cap=cap,
        tail_bound_estimate=2.0 / (mu.rho * math.sqrt(2 * math.pi * cap)),
    )
    values = TrialValues(out["hit"].astype(np.float64), out["runtime_ns"])
    return est, values


def default_hit_cap(a) -> int:
    """Default vertex cap 200 |a|^4 (relevant tree sizes are ~ |a|^4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    n2 = float(a @ a)
    return max(1, int(200.0 * n2 * n2))


def brw_visited(p: int, mu: OffspringDist, theta: JumpDist,
                cap_per_tree: int, seed: int) -> VisitedSites:
    """Union of visited sets of p independent spatial trees (each cap-limited).

    Tree j uses the stream keyed by (seed, j), so visited sets are nested as
    p grows at a fixed seed.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    mu_accept, mu_alias = mu.alias_tables()
    th_accept, th_alias = theta.alias_tables()
    shift, offset = _pack_params(theta.d)
    child_buf = np.empty((max(1, mu.max_children), theta.d), dtype=np.int64)
    parts = []
    for j in range(p):
        state = xoshiro_states(seed, j, j + 1)[0]
        keys, n_keys, _capped, overflow = dfs_spatial_collect(
            state, mu_accept, mu_alias, th_accept, th_alias, theta.points,
            cap_per_tree, offset, shift, child_buf)
        if overflow:
            raise OverflowError("walk left the packable coordinate box")
        parts.append(keys[:n_keys].copy())
    uniq = np.unique(np.concatenate(parts))
    return VisitedSites(unpack_keys(uniq, theta.d))


def brw_hit_identity_check(a, p: int, mu: OffspringDist, theta: JumpDist,
                           cap: int, trials: int, seed: int,
                           workers: int = 1) -> IdentityCheck:
    """Compare P(a in V^[p]) against 1 - (1 - p_single)^p.

    Both sides are estimated with independent streams; the identity is exact
    (the p trees are iid), so the z statistic of the difference is standard
    normal up to Monte Carlo error.
    """
    target = np.asarray(a, dtype=np.int64).reshape(-1)
    lhs_out = map_trials(
        _hit_chunk, (mu, theta, target, cap, p, derive_seed(seed, "brw-lhs")),
        trials, workers)
    rhs_out = map_trials(
        _hit_chunk, (mu, theta, target, cap, 1, derive_seed(seed, "brw-rhs")),
        trials, workers)
    lhs = float(lhs_out["hit"].mean())
    lhs_se = _binomial_se(lhs, trials)
    q = float(rhs_out["hit"].mean())
    q_se = _binomial_se(q, trials)
    rhs = 1.0 - (1.0 - q) ** p
    rhs_se = p * (1.0 - q) ** (p - 1) * q_se  # delta method
    denom = math.hypot(lhs_se, rhs_se)
    z = (lhs - rhs) / denom if denom > 0 else 0.0
    return IdentityCheck(lhs, lhs_se, rhs, rhs_se, z, q,
                         lhs_out["hit"].astype(np.float64),
                         rhs_out["hit"].astype(np.float64))
