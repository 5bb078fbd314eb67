"""Experiment runner: configs, seeded parallel execution, reports.

Each experiment writes one CSV of per-trial records plus a JSON summary with
every check's statistic, threshold and verdict; verdicts are recomputable
from the CSV alone.  The per-trial random streams are keyed by (master seed,
trial index), so rerunning a config at a fixed seed yields byte-identical
CSVs for any worker count.  Wall-clock timings are written only when
explicitly requested (otherwise the runtime_ns column is 0) to keep that
guarantee.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import gw_trees as gt
from . import indexed_walk as iw
from . import lattice as lat
from . import limits as lim
from . import snake as sn
from ._parallel import map_trials
from ._rng import derive_seed, trial_generator

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "Report",
    "ResultRecord",
    "ks_two_sample",
    "run",
]

EXPERIMENT_KINDS = ("range", "localtime", "hit", "brw-identity", "snake",
                    "verify-all")
SCHEMA_VERSION = "treewalk-report-v1"
CSV_HEADER = "trial_id,size,statistic,runtime_ns\n"


# --------------------------------------------------------------------- types

@dataclass
class ExperimentConfig:
    """One experiment run; a flat key=value file plus CLI flags build this."""

    kind: str
    seed: int
    d: int = 2
    mu: str = "geometric"
    theta: str = "lazy"
    sizes: tuple = ()
    trials: int = 0          # 0 means kind-specific default
    cap: int = 0             # 0 means kind-specific default
    a: tuple = ()            # lattice target for hit / brw-identity
    p: int = 5               # initial particles for brw-identity
    m: int = 100_000         # snake lifetime grid
    h: float = 0.02          # occupation cell width
    snakes: int = 1000
    snake_bridge: bool = False
    profile: str = "full"    # verify-all: full | smoke
    out: str = "treewalk-out"
    workers: int = 1
    timings: bool = False
    tolerances: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.seed is None:
            raise ValueError("a master seed is required (no wall-clock default)")
        if self.trials < 0:
            raise ValueError("trials must be >= 1 (or 0 for the default)")
        if self.profile not in ("full", "smoke"):
            raise ValueError("profile must be 'full' or 'smoke'")
        self.make_mu()
        self.make_theta()

    def make_mu(self) -> gt.OffspringDist:
        return parse_mu(self.mu)

    def make_theta(self) -> lat.JumpDist:
        return parse_theta(self.theta, self.d)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))


@dataclass
class ResultRecord:
    """One check: pass/fail is exactly ``statistic <comparison> threshold``."""

    experiment: str
    check: str
    params: dict
    estimate: float
    se: float
    statistic: float
    threshold: float
    comparison: str  # "<=" or ">="
    passed: bool
    runtime_ns: int

    @staticmethod
    def judge(experiment, check, params, estimate, se, statistic, threshold,
              comparison, runtime_ns=0) -> "ResultRecord":
        if comparison == "<=":
            passed = statistic <= threshold
        elif comparison == ">=":
            passed = statistic >= threshold
        else:
            raise ValueError(f"bad comparison {comparison!r}")
        return ResultRecord(experiment, check, params, float(estimate),
                            float(se), float(statistic), float(threshold),
                            comparison, bool(passed), int(runtime_ns))


@dataclass
class Report:
    records: list
    csv_paths: dict
    json_path: Path

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)


# ------------------------------------------------------------- law parsing

def parse_mu(spec: str) -> gt.OffspringDist:
    """'geometric', 'binary', or a comma list of probabilities over 0..K."""
    s = spec.strip()
    if s == "geometric":
        return gt.OffspringDist.geometric()
    if s == "binary":
        return gt.OffspringDist.binary()
    return gt.OffspringDist.from_pmf([float(t) for t in s.split(",")])


def parse_theta(spec: str, d: int) -> lat.JumpDist:
    """'lazy', 'box', or 'file:<path>' with 'x_1 ... x_d prob' lines."""
    s = spec.strip()
    if s == "lazy":
        return lat.JumpDist.lazy(d)
    if s == "box":
        return lat.JumpDist.box_uniform(d)
    if s.startswith("file:"):
        return lat.JumpDist.from_text(Path(s[5:]).read_text())
    raise ValueError(f"unknown jump law {spec!r}")


# ----------------------------------------------------------- config file IO

_TUPLE_KEYS = {"sizes", "a"}
_INT_KEYS = {"seed", "d", "trials", "cap", "p", "m", "snakes", "workers"}
_FLOAT_KEYS = {"h"}
_BOOL_KEYS = {"snake_bridge", "timings"}


def parse_config_text(text: str, kind: str | None = None) -> ExperimentConfig:
    """Flat 'key = value' lines; '#' starts a comment; tol.NAME sets a tolerance."""
    values: dict = {}
    tolerances: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key.startswith("tol."):
            tolerances[key[4:]] = float(val)
        elif key in _TUPLE_KEYS:
            values[key] = tuple(int(t) for t in val.split(",") if t)
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _BOOL_KEYS:
            values[key] = val.lower() in ("1", "true", "yes", "on")
        else:
            values[key] = val
    if kind is not None:
        values["kind"] = kind
    if "seed" not in values:
        raise ValueError("config must set a seed")
    cfg = ExperimentConfig(tolerances=tolerances, **values)
    cfg.validate()
    return cfg


# ------------------------------------------------------------------ writers

def _fmt(x) -> str:
    return repr(float(x))


def write_trials_csv(path: Path, sizes, statistics, runtime_ns,
                     timings: bool) -> None:
    """Per-trial records; runtime_ns is zeroed unless timings are requested,
    which keeps rerun CSVs byte-identical."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER)
        for i, (size, stat) in enumerate(zip(sizes, statistics)):
            rt = int(runtime_ns[i]) if timings else 0
            fh.write(f"{i},{int(size)},{_fmt(stat)},{rt}\n")


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic with asymptotic p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    res = sps.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


# -------------------------------------------------------------- experiments

def default_hit_trials(a) -> int:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    return int(2e4 * float(a @ a) / 2.0)


def _timer():
    t0 = time.perf_counter_ns()
    return lambda: time.perf_counter_ns() - t0


def run_range(cfg: ExperimentConfig, out_dir: Path, tag="range"):
    """Scaled-range samples across sizes; KS pairs; optional snake bridge."""
    mu, theta = cfg.make_mu(), cfg.make_theta()
    sizes = cfg.sizes or (20_000, 80_000)
    trials = cfg.trials or 1000
    records, csvs = [], {}
    samples = {}
    all_sizes, all_stats, all_rts = [], [], []
    for n in sizes:
        elapsed = _timer()
        tv = iw.scaled_range_sample(mu, theta, n, trials,
                                    derive_seed(cfg.seed, f"{tag}-n{n}"),
                                    cfg.workers)
        samples[n] = tv.values
        all_sizes += [n] * trials
        all_stats += list(tv.values)
        all_rts += list(tv.runtime_ns)
        records.append(ResultRecord.judge(
            tag, f"mean-positive-n{n}", {"n": n, "trials": trials},
            tv.values.mean(), tv.values.std(ddof=1) / math.sqrt(trials),
            float(tv.values.min()), 0.0, ">=", elapsed()))
    ks_level = cfg.tol("ks_level", 0.01)
    for lo, hi in zip(sizes[:-1], sizes[1:]):
        stat, pval = ks_two_sample(samples[lo], samples[hi])
        records.append(ResultRecord.judge(
            tag, f"ks-n{lo}-vs-n{hi}",
            {"n_low": lo, "n_high": hi, "trials": trials, "ks_stat": stat},
            stat, 0.0, pval, ks_level, ">="))
    if cfg.snake_bridge:
        elapsed = _timer()
        ctx = lim.LimitContext.from_laws(mu, theta)
        vols = _snake_volume_sample(cfg, tag)
        scaled_vols = ctx.c ** (-ctx.d) * vols
        n_top = sizes[-1]
        stat, pval = ks_two_sample(samples[n_top], scaled_vols)
        records.append(ResultRecord.judge(
            tag, f"ks-n{n_top}-vs-snake",
            {"n": n_top, "snakes": cfg.snakes, "m": cfg.m, "h": cfg.h,
             "ks_stat": stat}, stat, 0.0, pval, ks_level, ">=", elapsed()))
        all_sizes += [0] * scaled_vols.size  # size 0 marks snake rows
        all_stats += list(scaled_vols)
        all_rts += [0] * scaled_vols.size
    path = out_dir / f"{tag}.csv"
    write_trials_csv(path, all_sizes, all_stats,
                     np.asarray(all_rts, dtype=np.int64), cfg.timings)
    csvs[tag] = path
    return records, csvs


def _snake_volume_chunk(common, lo, hi):
    d, m, h, seed = common
    vols = np.empty(hi - lo)
    for t in range(lo, hi):
        rng = trial_generator(seed, t)
        exc = sn.sample_excursion(m, rng)
        sample = sn.evolve_head(exc, d, rng)
        vols[t - lo] = sn.occupation_grid(sample.heads, h).support_volume
    return {"volume": vols}


def _snake_volume_sample(cfg: ExperimentConfig, tag: str) -> np.ndarray:
    out = map_trials(_snake_volume_chunk,
                     (cfg.d, cfg.m, cfg.h, derive_seed(cfg.seed, f"{tag}-snake")),
                     cfg.snakes, cfg.workers)
    return out["volume"]


def run_localtime(cfg: ExperimentConfig, out_dir: Path, tag="localtime"):
    """Local-time second moment against the quadrature kernel."""
    mu, theta = cfg.make_mu(), cfg.make_theta()
    n = cfg.sizes[0] if cfg.sizes else 60_000
    trials = cfg.trials or 20_000
    scale = float(n) ** 0.25
    # distinct nonzero targets on the first two axes (design default)
    if theta.d == 1:
        xt, yt = np.array([0.5]), np.array([-0.5])
    else:
        xt = np.zeros(theta.d)
        yt = np.zeros(theta.d)
        xt[0] = 0.5
        yt[1] = 0.5
    x_n = np.floor(scale * xt).astype(np.int64)
    y_n = np.floor(scale * yt).astype(np.int64)
    elapsed = _timer()
    est, tv = iw.local_time_moment(mu, theta, n, x_n, y_n, trials,
                                   derive_seed(cfg.seed, tag), cfg.workers)
    ctx = lim.LimitContext.from_laws(mu, theta)
    rel_tol = 1e-6
    reference = lim.phi(ctx, x_n / scale, y_n / scale, rel_tol=rel_tol)
    quad_err = rel_tol * abs(reference)
    rel_band = cfg.tol("localtime_rel", 0.10)
    tol = max(rel_band * abs(reference), 3.0 * est.se + quad_err)
    rec = ResultRecord.judge(
        tag, "moment-vs-kernel",
        {"n": n, "trials": trials, "x_n": x_n.tolist(), "y_n": y_n.tolist(),
         "reference": reference, "tolerance": tol},
        est.value, est.se, abs(est.value - reference), tol, "<=", elapsed())
    path = out_dir / f"{tag}.csv"
    write_trials_csv(path, [n] * trials, tv.values, tv.runtime_ns, cfg.timings)
    return [rec], {tag: path}


def run_hit(cfg: ExperimentConfig, out_dir: Path, tag="hit"):
    """Distant-point hitting probability against 2(4-d)/rho^2."""
    mu, theta = cfg.make_mu(), cfg.make_theta()
    a = np.asarray(cfg.a if len(cfg.a) else [10] + [0] * (theta.d - 1),
                   dtype=np.int64)
    cap = cfg.cap or iw.default_hit_cap(a)
    trials = cfg.trials or default_hit_trials(a)
    elapsed = _timer()
    est, tv = iw.estimate_hitting_prob(mu, theta, a, cap, trials,
                                       derive_seed(cfg.seed, tag), cfg.workers)
    took = elapsed()
    ctx = lim.LimitContext.from_laws(mu, theta)
    limit = lim.visit_limit_constant(ctx)
    scale = float(a @ np.linalg.solve(theta.M, a.astype(np.float64)))
    scaled = scale * est.p_hat
    rel_err = abs(scaled - limit) / limit
    rel_band = cfg.tol("hit_rel", 0.15)
    params = {"d": theta.d, "a": a.tolist(), "cap": cap, "trials": trials,
              "p_hat": est.p_hat, "se": est.se, "scaled": scaled,
              "limit": limit, "capped_fraction": est.capped_fraction,
              "tail_bound_estimate": est.tail_bound_estimate}
    records = [
        ResultRecord.judge(tag, "scaled-prob-vs-limit", params, scaled,
                           scale * est.se, rel_err, rel_band, "<=", took),
        ResultRecord.judge(
            tag, "capped-fraction", params, est.capped_fraction, 0.0,
            est.capped_fraction,
            cfg.tol("capped_rel", 0.05) * (est.p_hat + est.capped_fraction),
            "<="),
    ]
    path = out_dir / f"{tag}.csv"
    write_trials_csv(path, [cap] * trials, tv.values, tv.runtime_ns,
                     cfg.timings)
    return records, {tag: path}


def run_brw_identity(cfg: ExperimentConfig, out_dir: Path, tag="brw-identity"):
    """Union-hit probability against 1 - (1 - p_single)^p."""
    mu, theta = cfg.make_mu(), cfg.make_theta()
    a = np.asarray(cfg.a if len(cfg.a) else [3] + [0] * (theta.d - 1),
                   dtype=np.int64)
    cap = cfg.cap or iw.default_hit_cap(a)
    trials = cfg.trials or 100_000
    elapsed = _timer()
    chk = iw.brw_hit_identity_check(a, cfg.p, mu, theta, cap, trials,
                                    derive_seed(cfg.seed, tag), cfg.workers)
    rec = ResultRecord.judge(
        tag, "identity-z",
        {"a": a.tolist(), "p": cfg.p, "cap": cap, "trials": trials,
         "lhs": chk.lhs, "rhs": chk.rhs, "p_single": chk.p_single},
        chk.lhs - chk.rhs, math.hypot(chk.lhs_se, chk.rhs_se), abs(chk.z),
        cfg.tol("z_band", 3.0), "<=", elapsed())
    # union-side rows carry size=p, single-tree rows size=1
    path = out_dir / f"{tag}.csv"
    sizes = [cfg.p] * trials + [1] * trials
    stats = np.concatenate([chk.lhs_hits, chk.rhs_hits])
    write_trials_csv(path, sizes, stats,
                     np.zeros(stats.size, dtype=np.int64), cfg.timings)
    return [rec], {tag: path}


def run_snake_cov(cfg: ExperimentConfig, out_dir: Path, tag="snake"):
    """Covariance contract: Cov(head_s, head_t) vs the grid excursion min."""
    m = cfg.m if cfg.m else 10_000
    snakes = cfg.snakes or 10_000
    n_pairs = 10
    pair_rng = trial_generator(derive_seed(cfg.seed, f"{tag}-pairs"), 0)
    exc = sn.sample_excursion(m, pair_rng)
    idx = pair_rng.integers(1, m, size=(n_pairs, 2))
    elapsed = _timer()
    out = map_trials(_snake_pair_chunk,
                     (cfg.d, exc.values, idx, derive_seed(cfg.seed, tag)),
                     snakes, cfg.workers)
    took = elapsed()
    prods = out["products"].reshape(snakes, n_pairs)
    records = []
    for k in range(n_pairs):
        i, j = int(idx[k, 0]), int(idx[k, 1])
        target = exc.grid_min(i, j)
        mean = float(prods[:, k].mean())
        se = float(prods[:, k].std(ddof=1) / math.sqrt(snakes))
        records.append(ResultRecord.judge(
            tag, f"cov-pair{k}",
            {"s": i / m, "t": j / m, "m": m, "snakes": snakes, "d": cfg.d,
             "target": target},
            mean, se, abs(mean - target), cfg.tol("cov_band", 3.0) * se,
            "<=", took if k == 0 else 0))
    path = out_dir / f"{tag}.csv"
    sizes = np.repeat(np.arange(n_pairs), snakes)
    stats = prods.T.reshape(-1)
    write_trials_csv(path, sizes, stats,
                     np.zeros(stats.size, dtype=np.int64), cfg.timings)
    return records, {tag: path}


def _snake_pair_chunk(common, lo, hi):
    d, exc_values, idx, seed = common
    exc = sn.ExcursionPath(exc_values)
    n_pairs = idx.shape[0]
    prods = np.empty((hi - lo, n_pairs))
    for t in range(lo, hi):
        rng = trial_generator(seed, t)
        sample = sn.evolve_head(exc, d, rng)
        hs = sample.heads[idx[:, 0]]
        ht = sample.heads[idx[:, 1]]
        prods[t - lo] = (hs * ht).mean(axis=1)  # coordinates pooled
    return {"products": prods.reshape(-1)}


# ----------------------------------------------------- closed-form checks

def check_kemperman(cfg: ExperimentConfig, out_dir: Path):
    """Total-progeny asymptotics and the Catalan closed form (geometric mu)."""
    mu = gt.OffspringDist.geometric()
    elapsed = _timer()
    k_top = 2000
    pmf = gt.total_progeny_pmf(mu, k_top)
    ratio = k_top ** 1.5 * pmf[-1] * mu.rho * math.sqrt(2 * math.pi)
    catalan_err = max(
        abs(pmf[n - 1] - math.comb(2 * (n - 1), n - 1) / (n * 2 ** (2 * n - 1)))
        for n in range(1, 21))
    took = elapsed()
    records = [
        ResultRecord.judge("kemperman", f"ratio-k{k_top}",
                           {"k": k_top, "ratio": ratio}, ratio, 0.0,
                           abs(ratio - 1.0), cfg.tol("kemp_band", 0.05),
                           "<=", took),
        ResultRecord.judge("kemperman", "catalan-k<=20", {"k_max": 20},
                           catalan_err, 0.0, catalan_err, 1e-12, "<="),
    ]
    path = out_dir / "kemperman.csv"
    write_trials_csv(path, np.arange(1, k_top + 1), pmf,
                     np.zeros(k_top, dtype=np.int64), cfg.timings)
    return records, {"kemperman": path}


def check_conditioned_law(cfg: ExperimentConfig, out_dir: Path):
    """Chi-square of the n=4 conditioned sampler against uniform shapes."""
    mu = gt.OffspringDist.geometric()
    trials = 100_000 if cfg.profile == "full" else 20_000
    elapsed = _timer()
    out = map_trials(_shape_chunk, (mu, derive_seed(cfg.seed, "cond-law")),
                     trials, cfg.workers)
    shapes = out["shape"]
    n_shapes = 5  # Catalan(3)
    counts = np.bincount(shapes.astype(np.int64), minlength=n_shapes)
    chi2, pval = sps.chisquare(counts)
    rec = ResultRecord.judge(
        "conditioned-law", "chi2-n4-uniform",
        {"trials": trials, "counts": counts.tolist(), "chi2": float(chi2)},
        chi2, 0.0, float(pval), cfg.tol("chi2_level", 0.01), ">=", elapsed())
    path = out_dir / "conditioned-law.csv"
    write_trials_csv(path, [4] * trials, shapes.astype(float),
                     np.zeros(trials, dtype=np.int64), cfg.timings)
    return [rec], {"conditioned-law": path}


_SHAPES_N4 = {(3, 0, 0, 0): 0, (2, 1, 0, 0): 1, (2, 0, 1, 0): 2,
              (1, 2, 0, 0): 3, (1, 1, 1, 0): 4}


def _shape_chunk(common, lo, hi):
    mu, seed = common
    out = np.empty(hi - lo)
    for t in range(lo, hi):
        rng = trial_generator(seed, t)
        tree = gt.sample_gw_conditioned(mu, 4, rng)
        out[t - lo] = _SHAPES_N4[tuple(tree.child_counts.tolist())]
    return {"shape": out}


def check_llt(cfg: ExperimentConfig, out_dir: Path):
    """Local-CLT deviation decay for the lazy walks in d = 1, 2."""
    records = []
    rows_size, rows_stat = [], []
    for d in (1, 2):
        theta = lat.JumpDist.lazy(d)
        elapsed = _timer()
        devs = {n: lat.llt_deviation(theta, n) for n in (12, 50, 200)}
        took = elapsed()
        rows_size += [d] * 3
        rows_stat += [devs[12], devs[50], devs[200]]
        records.append(ResultRecord.judge(
            "llt", f"d{d}-delta200-lt-delta50",
            {"d": d, "deltas": {str(k): v for k, v in devs.items()}},
            devs[200], 0.0, devs[200] / devs[50], 1.0, "<=", took))
        records.append(ResultRecord.judge(
            "llt", f"d{d}-delta200-lt-half-delta12", {"d": d},
            devs[200], 0.0, devs[200] / devs[12], 0.5, "<="))
    path = out_dir / "llt.csv"
    write_trials_csv(path, rows_size, rows_stat,
                     np.zeros(len(rows_stat), dtype=np.int64), cfg.timings)
    return records, {"llt": path}


def check_closed_forms(cfg: ExperimentConfig, out_dir: Path):
    """Triple-density mass, kernel-vs-oracle, and the exact constants."""
    records = []
    elapsed = _timer()
    mass = lim.triple_density_mass()
    records.append(ResultRecord.judge(
        "closed-form", "triple-density-mass", {}, mass, 0.0,
        abs(mass - 1.0), 1e-6, "<=", elapsed()))

    ctx1 = lim.LimitContext(1, 2.0, [[1.0]])
    r1, r2, r3 = 0.3, 0.5, 0.7
    x, y = 1.0, -1.0
    closed = lim.three_point_kernel(ctx1, r1, r2, r3, [x], [y])
    z = np.linspace(-14.0, 14.0, 700_001)
    p = ctx1.kernel()
    brute = float(np.trapezoid(
        p(r1, z[:, None]) * p(r2, x - z[:, None]) * p(r3, y - z[:, None]),
        z, axis=0))
    records.append(ResultRecord.judge(
        "closed-form", "kernel-vs-zgrid",
        {"r": [r1, r2, r3], "x": x, "y": y, "closed": closed, "brute": brute},
        closed, 0.0, abs(closed - brute), 1e-6, "<="))

    hits = max(
        abs(lim.hitting_constant(3, [1, 0, 0], [0, 0, 0]) - 0.5),
        abs(lim.hitting_constant(2, [2, 0], [0, 0]) - 0.25),
        abs(lim.hitting_constant(1, [1], [0]) - 1.5))
    records.append(ResultRecord.judge(
        "closed-form", "hitting-constants", {}, 0.0, 0.0, hits, 0.0, "<="))

    visits = max(
        abs(lim.visit_limit_constant(lim.LimitContext(2, 2.0, np.eye(2))) - 2.0),
        abs(lim.visit_limit_constant(lim.LimitContext(3, 1.0, np.eye(3))) - 2.0),
        abs(lim.visit_limit_constant(lim.LimitContext(1, 2.0, [[1.0]])) - 3.0))
    records.append(ResultRecord.judge(
        "closed-form", "visit-limit-constants", {}, 0.0, 0.0, visits, 0.0,
        "<="))

    ito_err = abs(lim.ito_weight(1.0) - 1.0 / (2.0 * math.sqrt(2 * math.pi)))
    records.append(ResultRecord.judge(
        "closed-form", "ito-weight", {}, lim.ito_weight(1.0), 0.0, ito_err,
        0.0, "<="))
    path = out_dir / "closed-form.csv"
    stats = [r.statistic for r in records]
    write_trials_csv(path, [0] * len(stats), stats,
                     np.zeros(len(stats), dtype=np.int64), cfg.timings)
    return records, {"closed-form": path}


# ----------------------------------------------------------------- verify-all

def _smoke_overrides(cfg: ExperimentConfig) -> dict:
    """Reduced sizes for pipeline/determinism runs (statistics stay honest
    but bands widen where the asymptotics cannot have kicked in)."""
    return {
        "range": dict(sizes=(2000, 8000), trials=200, m=20_000, h=0.05,
                      snakes=200),
        "localtime": dict(sizes=(4000,), trials=1500,
                          tolerances={"localtime_rel": 0.5}),
        "hit": dict(a_list=((6, 0),), dims=(2,), trials=50_000,
                    tolerances={"hit_rel": 0.5, "capped_rel": 1.0}),
        "brw-identity": dict(trials=20_000),
        "snake": dict(m=2000, snakes=2000),
    }


def run_verify_all(cfg: ExperimentConfig, out_dir: Path):
    records, csvs = [], {}
    smoke = cfg.profile == "smoke"
    ov = _smoke_overrides(cfg) if smoke else {}

    def sub(kind, **kw) -> ExperimentConfig:
        base = asdict(cfg)
        base.update(kind=kind, **kw)
        tol = dict(cfg.tolerances)
        tol.update(kw.get("tolerances", {}))
        base["tolerances"] = tol
        return ExperimentConfig(**base)

    for fn in (check_kemperman, check_conditioned_law, check_llt,
               check_closed_forms):
        r, c = fn(cfg, out_dir)
        records += r
        csvs.update(c)

    r, c = run_snake_cov(sub("snake", **({"m": 10_000, "snakes": 10_000}
                                         if not smoke else ov["snake"])),
                         out_dir)
    records += r
    csvs.update(c)

    r, c = run_brw_identity(
        sub("brw-identity", a=(3, 0), p=5,
            **(ov.get("brw-identity", {"trials": 100_000}))), out_dir)
    records += r
    csvs.update(c)

    # hitting probabilities across dimensions and radii
    if smoke:
        hit_plan = [(2, (6, 0))]
        hit_kw = {k: v for k, v in ov["hit"].items()
                  if k not in ("a_list", "dims")}
    else:
        hit_plan = [(d, (r,) + (0,) * (d - 1))
                    for d in (1, 2, 3) for r in (10, 20)]
        hit_kw = {}
    for d, a in hit_plan:
        r, c = run_hit(sub("hit", d=d, a=a, cap=0,
                           trials=hit_kw.get("trials", 0),
                           tolerances=hit_kw.get("tolerances", {})),
                       out_dir, tag=f"hit-d{d}-a{a[0]}")
        records += r
        csvs.update(c)

    r, c = run_localtime(
        sub("localtime", **(ov.get("localtime",
                                   {"sizes": (60_000,), "trials": 20_000}))),
        out_dir)
    records += r
    csvs.update(c)

    r, c = run_range(
        sub("range", snake_bridge=True,
            **(ov.get("range", {"sizes": (20_000, 80_000), "trials": 1000,
                                "m": 100_000, "h": 0.02, "snakes": 1000}))),
        out_dir)
    records += r
    csvs.update(c)
    return records, csvs


# ------------------------------------------------------------------- driver

_RUNNERS = {
    "range": run_range,
    "localtime": run_localtime,
    "hit": run_hit,
    "brw-identity": run_brw_identity,
    "snake": run_snake_cov,
}


def run(cfg: ExperimentConfig) -> Report:
    """Execute the experiment, write CSVs and the JSON report."""
    cfg.validate()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter_ns()
    if cfg.kind == "verify-all":
        records, csvs = run_verify_all(cfg, out_dir)
    else:
        records, csvs = _RUNNERS[cfg.kind](cfg, out_dir)
    total_ns = time.perf_counter_ns() - t0
    payload = {
        "schema": SCHEMA_VERSION,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items()},
        "total_runtime_ns": total_ns if cfg.timings else 0,
        "all_passed": all(r.passed for r in records),
        "checks": [asdict(r) for r in records],
    }
    json_path = out_dir / "report.json"
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return Report(records, csvs, json_path)


def format_table(records) -> str:
    """Human-readable pass/fail table, one line per check."""
    lines = []
    width = max((len(f"{r.experiment}:{r.check}") for r in records),
                default=10)
    for r in records:
        name = f"{r.experiment}:{r.check}"
        verdict = "PASS" if r.passed else "FAIL"
        lines.append(f"{name:<{width}}  statistic={r.statistic:.6g} "
                     f"{r.comparison} {r.threshold:.6g}  [{verdict}]")
    return "\n".join(lines)
