"""Lattice growth and coverage processes.

The growth process lives on the square lattice: a connected cluster grows
from the origin, frontier sites fire at state-dependent rates bounded
between c_lo and c_hi and nondecreasing in the cluster.  The infinite
lattice is truncated to a finite box; a run that touches the boundary
before reaching the target set is invalid and gets resampled in a larger
box, which preserves the law of the hitting time.

The coverage process draws IID uniform vertices of a graph until every
vertex is in the closed neighborhood of the drawn set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chain import DiscreteChainSpec
from .graphs import WeightedGraph
from .stats import SampleStats

Site = tuple[int, int]

_NBRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _site_hash_unit(v: Site) -> float:
    """Deterministic pseudo-random value in [0,1) from lattice coordinates."""
    x, y = v
    h = (x * 2654435761 + y * 40503 + 0x9E3779B9) & 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x45D9F3B) & 0xFFFFFFFF
    h ^= h >> 16
    return h / 2**32


def constant_rate(c: float):
    def rate(S, v):
        return c
    return rate, c, c


def site_weighted_rate(c_lo: float, c_hi: float):
    """Per-site rate fixed by the coordinates; trivially nondecreasing in S."""
    def rate(S, v):
        return c_lo + (c_hi - c_lo) * _site_hash_unit(v)
    return rate, c_lo, c_hi


def neighbor_count_rate(base: float):
    """base times the number of cluster neighbors; increasing in S."""
    def rate(S, v):
        return base * sum((v[0] + dx, v[1] + dy) in S for dx, dy in _NBRS)
    return rate, base, 4.0 * base


RATE_BUILTINS = {
    "constant": constant_rate,
    "site_weighted": site_weighted_rate,
    "neighbor_count": neighbor_count_rate,
}


class RateMonotonicityError(ValueError):
    """The supplied rate function decreases when the cluster grows."""


@dataclass
class GrowthConfig:
    radius: int
    target: frozenset[Site]
    rate_fn: Callable[[set, Site], float] = field(repr=False)
    c_lo: float = 1.0
    c_hi: float = 1.0

    @classmethod
    def builtin(cls, radius: int, target, kind: str, **params) -> "GrowthConfig":
        if kind not in RATE_BUILTINS:
            raise ValueError(f"unknown rate builtin {kind!r}; have {sorted(RATE_BUILTINS)}")
        fn, c_lo, c_hi = RATE_BUILTINS[kind](**params)
        target = frozenset(tuple(v) for v in target)
        if (0, 0) in target:
            raise ValueError("target must not contain the origin")
        for v in target:
            if max(abs(v[0]), abs(v[1])) > radius:
                raise ValueError(f"target site {v} outside box radius {radius}")
        return cls(radius=radius, target=target, rate_fn=fn, c_lo=c_lo, c_hi=c_hi)


def validate_rate_monotone(rate_fn, rng: np.random.Generator, trials: int = 200,
                           radius: int = 4) -> None:
    """Sampled check of the growth condition: adding a site to the cluster
    never lowers any frontier rate.  Raises on a violation."""
    for _ in range(trials):
        cluster = {(0, 0)}
        for _ in range(int(rng.integers(0, 8))):
            frontier = _frontier(cluster, radius)
            if not frontier:
                break
            cluster.add(frontier[int(rng.integers(len(frontier)))])
        frontier = _frontier(cluster, radius)
        if len(frontier) < 2:
            continue
        i, j = rng.choice(len(frontier), size=2, replace=False)
        v, v2 = frontier[int(i)], frontier[int(j)]
        before = rate_fn(cluster, v)
        after = rate_fn(cluster | {v2}, v)
        if after < before - 1e-12:
            raise RateMonotonicityError(
                f"rate at {v} dropped from {before} to {after} when adding {v2}"
            )


def _frontier(cluster: set, radius: int) -> list:
    out = set()
    for (x, y) in cluster:
        for dx, dy in _NBRS:
            v = (x + dx, y + dy)
            if v not in cluster and max(abs(v[0]), abs(v[1])) <= radius:
                out.add(v)
    return sorted(out)


@dataclass
class GrowthRun:
    T: float
    valid: bool
    cluster_size: int
    radius: int


def growth_simulate(cfg: GrowthConfig, rng: np.random.Generator) -> GrowthRun:
    """Event-driven simulation until the cluster meets the target set.

    Invalid (boundary touched first) runs are flagged; use
    :func:`growth_sample` for automatic resampling in a larger box.
    """
    cluster = {(0, 0)}
    t = 0.0
    while True:
        frontier = _frontier(cluster, cfg.radius)
        rates = [cfg.rate_fn(cluster, v) for v in frontier]
        for r in rates:
            if not (cfg.c_lo - 1e-12 <= r <= cfg.c_hi + 1e-12):
                raise ValueError(f"rate {r} escapes the stated bounds [{cfg.c_lo}, {cfg.c_hi}]")
        total = sum(rates)
        t += rng.exponential(1.0 / total)
        pick = rng.random() * total
        acc = 0.0
        chosen = frontier[-1]
        for v, r in zip(frontier, rates):
            acc += r
            if pick < acc:
                chosen = v
                break
        cluster.add(chosen)
        if chosen in cfg.target:
            return GrowthRun(T=t, valid=True, cluster_size=len(cluster), radius=cfg.radius)
        if max(abs(chosen[0]), abs(chosen[1])) >= cfg.radius:
            return GrowthRun(T=t, valid=False, cluster_size=len(cluster), radius=cfg.radius)


def growth_sample(cfg: GrowthConfig, rng: np.random.Generator,
                  max_retries: int = 8) -> GrowthRun:
    """One valid hitting time; boundary-invalid runs are resampled with a
    doubled box radius."""
    radius = cfg.radius
    for _ in range(max_retries):
        attempt = GrowthConfig(radius=radius, target=cfg.target, rate_fn=cfg.rate_fn,
                               c_lo=cfg.c_lo, c_hi=cfg.c_hi)
        run = growth_simulate(attempt, rng)
        if run.valid:
            return run
        radius *= 2
    raise RuntimeError("growth run kept touching the boundary; target too far out?")


@dataclass
class InequalityReport:
    runs: int
    valid_runs: int
    mean: float
    variance: float
    bound: float
    band: float
    holds: bool
    inconclusive: bool


def _variance_inequality_report(samples: np.ndarray, bound_fn, valid_runs=None) -> InequalityReport:
    stats = SampleStats.from_samples(samples)
    bound = bound_fn(stats.mean)
    # jackknife band on the variance estimate plus the bound's mean-driven wiggle
    var_se = 2.0 * stats.sd * stats.sd_se
    band = 3.0 * (var_se + abs(bound_fn(stats.mean + stats.mean_se) - bound))
    holds = stats.variance <= bound + band
    inconclusive = (not holds) and (stats.variance - band <= bound)
    return InequalityReport(
        runs=len(samples), valid_runs=valid_runs if valid_runs is not None else len(samples),
        mean=stats.mean, variance=stats.variance, bound=bound, band=band,
        holds=holds or inconclusive, inconclusive=inconclusive,
    )


def prop1_check(cfg: GrowthConfig, runs: int, seed, threads: int = 1) -> InequalityReport:
    """Monte Carlo check of var T <= E T / c_lo for the growth process."""
    if runs < 1000:
        raise ValueError("prop1_check needs at least 1e3 runs")
    samples = np.empty(runs)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(runs)

    def do_run(i):
        rng = np.random.default_rng(children[i])
        samples[i] = growth_sample(cfg, rng).T

    _run_indexed(do_run, runs, threads)
    return _variance_inequality_report(samples, lambda m: m / cfg.c_lo)


# ---------------------------------------------------------------------------
# Coverage

@dataclass(frozen=True)
class CoverageConfig:
    """Coverage runs on an arbitrary simple graph, connectivity not
    required (the edgeless case is the plain coupon collector)."""

    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one vertex")
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n and u != v):
                raise ValueError(f"bad edge {(u, v)}")

    @classmethod
    def from_graph(cls, g: WeightedGraph) -> "CoverageConfig":
        return cls(n=g.n, edges=tuple(g.edges))

    def closed_neighborhoods(self) -> list[int]:
        masks = [1 << v for v in range(self.n)]
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks


def coverage_simulate(cfg: CoverageConfig, rng: np.random.Generator) -> int:
    """Number of IID uniform vertex draws until every vertex lies in the
    closed neighborhood of the drawn set."""
    nbhd = cfg.closed_neighborhoods()
    full = (1 << cfg.n) - 1
    covered = 0
    t = 0
    while covered != full:
        v = int(rng.integers(cfg.n))
        covered |= nbhd[v]
        t += 1
    return t


def coverage_chain_spec(cfg: CoverageConfig) -> DiscreteChainSpec:
    """Discrete chain on the set of drawn vertices: each step adds a
    uniform vertex (self-loop when already drawn); absorbed once the
    closed neighborhood of the drawn set covers everything."""
    nbhd = cfg.closed_neighborhoods()
    full = (1 << cfg.n) - 1
    n = cfg.n

    def covered(mask: int) -> int:
        c = 0
        for v in range(n):
            if (mask >> v) & 1:
                c |= nbhd[v]
        return c

    def transitions(mask: int):
        return [(mask | (1 << v), 1.0 / n) for v in range(n) if not (mask >> v) & 1]

    return DiscreteChainSpec(
        initial=0,
        transitions=transitions,
        is_target=lambda mask: covered(mask) == full,
    )


def prop3_check(cfg: CoverageConfig, runs: int, seed, threads: int = 1) -> InequalityReport:
    """Monte Carlo check of var T <= n * E T for the coverage process."""
    if runs < 1000:
        raise ValueError("prop3_check needs at least 1e3 runs")
    samples = np.empty(runs)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(runs)

    def do_run(i):
        rng = np.random.default_rng(children[i])
        samples[i] = coverage_simulate(cfg, rng)

    _run_indexed(do_run, runs, threads)
    return _variance_inequality_report(samples, lambda m: cfg.n * m)


def _run_indexed(do_run, runs: int, threads: int) -> None:
    if threads <= 1:
        for i in range(runs):
            do_run(i)
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        def do_chunk(t):
            for i in range(t, runs, threads):
                do_run(i)
        list(pool.map(do_chunk, range(threads)))
