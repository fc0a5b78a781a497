"""Poisson multigraph growth: edge copies arrive at rate w_e, and we track
how long until the multigraph packs k edge-disjoint spanning trees or
triangles.

Packing numbers are recomputed from scratch at arrival instants (they can
change nowhere else); stopping times are located by binary search over the
event index, exploiting monotonicity of the packing number in time.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .graphs import Multigraph, WeightedGraph
from .stats import SampleStats


# ---------------------------------------------------------------------------
# Arrival stream

@dataclass
class MultigraphTrajectory:
    graph: WeightedGraph
    times: np.ndarray      # strictly increasing arrival times
    edge_ids: np.ndarray   # which base edge arrived at each event
    horizon: float
    _next_time: float = field(repr=False, default=math.inf)  # first arrival past horizon
    _rng: np.random.Generator = field(repr=False, default=None)

    def multigraph_at(self, n_events: int) -> Multigraph:
        mult = np.bincount(self.edge_ids[:n_events], minlength=self.graph.m)
        return Multigraph(self.graph, tuple(int(c) for c in mult))

    def counts_at(self, t: float) -> np.ndarray:
        j = int(np.searchsorted(self.times, t, side="right"))
        return np.bincount(self.edge_ids[:j], minlength=self.graph.m)

    def extend(self, new_horizon: float) -> None:
        """Continue the same Poisson stream to a later horizon, resuming at
        the pending arrival beyond the old horizon (no redraws in the
        window already observed empty)."""
        if new_horizon <= self.horizon:
            return
        times, edges, nxt = _arrival_block(self.graph, new_horizon, self._rng,
                                           pending=self._next_time)
        self.times = np.concatenate([self.times, times])
        self.edge_ids = np.concatenate([self.edge_ids, edges])
        self.horizon = new_horizon
        self._next_time = nxt


def _arrival_block(g: WeightedGraph, t_end: float, rng: np.random.Generator,
                   pending: float):
    """Superposition sampling: global Exp(sum w) inter-arrivals continuing
    from the ``pending`` arrival, edges chosen proportional to w_e.
    Returns (times <= t_end, edges, first arrival beyond t_end)."""
    w = g.weight_array()
    total = float(w.sum())
    probs = w / total
    times = []
    t = pending
    while t <= t_end:
        times.append(t)
        t += rng.exponential(1.0 / total)
    k = len(times)
    edges = rng.choice(g.m, size=k, p=probs) if k else np.empty(0, dtype=np.int64)
    return np.asarray(times), np.asarray(edges, dtype=np.int64), t


def simulate_arrivals(g: WeightedGraph, horizon: float,
                      rng: np.random.Generator) -> MultigraphTrajectory:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    first = rng.exponential(1.0 / float(sum(g.weights)))
    times, edges, nxt = _arrival_block(g, horizon, rng, pending=first)
    return MultigraphTrajectory(graph=g, times=times, edge_ids=edges,
                                horizon=horizon, _next_time=nxt, _rng=rng)


# ---------------------------------------------------------------------------
# Spanning-tree packing (matroid union augmentation)

class _Forest:
    def __init__(self, n: int):
        self.adj: list[dict[int, int]] = [dict() for _ in range(n)]  # v -> {nbr: element}
        self.size = 0

    def connected(self, u: int, v: int) -> bool:
        return self._path(u, v) is not None

    def _path(self, u: int, v: int):
        """Element ids on the tree path u..v, or None if disconnected."""
        prev = {u: (None, None)}
        queue = deque([u])
        while queue:
            x = queue.popleft()
            if x == v:
                out = []
                while x != u:
                    p, elem = prev[x]
                    out.append(elem)
                    x = p
                return out
            for y, elem in self.adj[x].items():
                if y not in prev:
                    prev[y] = (x, elem)
                    queue.append(y)
        return None

    def add(self, u: int, v: int, elem: int):
        self.adj[u][v] = elem
        self.adj[v][u] = elem
        self.size += 1

    def remove(self, u: int, v: int):
        del self.adj[u][v]
        del self.adj[v][u]
        self.size -= 1


def _union_forest_rank(endpoints: list[tuple[int, int]], n: int, k: int,
                       stop_at: int | None = None) -> int:
    """Maximum number of edge copies packable into k edge-disjoint forests
    (rank of the k-fold graphic matroid union), by BFS augmentation in the
    exchange graph."""
    forests = [_Forest(n) for _ in range(k)]
    where: dict[int, int] = {}  # element -> forest index
    free = set(range(len(endpoints)))

    def try_augment(e0: int) -> bool:
        came_from: dict[int, tuple[int, int]] = {}
        visited = {e0}
        queue = deque([e0])
        while queue:
            x = queue.popleft()
            xu, xv = endpoints[x]
            for i in range(k):
                if where.get(x) == i:
                    continue
                circuit = forests[i]._path(xu, xv)
                if circuit is None:
                    # x fits into forest i; unwind the eviction chain
                    cur, dest = x, i
                    while True:
                        parent = came_from.get(cur)
                        cu, cv = endpoints[cur]
                        if cur in where:
                            forests[where[cur]].remove(cu, cv)
                        forests[dest].add(cu, cv, cur)
                        where[cur] = dest
                        if parent is None:
                            return True
                        nxt, dest = parent
                        cur = nxt
                    # unreachable
                for c in circuit:
                    if c not in visited:
                        visited.add(c)
                        came_from[c] = (x, i)
                        queue.append(c)
        return False

    rank = 0
    progress = True
    while progress and free:
        progress = False
        for e0 in sorted(free):
            if try_augment(e0):
                free.discard(e0)
                rank += 1
                progress = True
                if stop_at is not None and rank >= stop_at:
                    return rank
    return rank


def has_spanning_tree_packing(m: Multigraph, k: int) -> bool:
    """True iff the multigraph contains k edge-disjoint spanning trees."""
    n = m.base.n
    need = k * (n - 1)
    if m.total_edges < need:
        return False
    endpoints = []
    for e, count in enumerate(m.multiplicity):
        u, v = m.base.edges[e]
        endpoints.extend([(u, v)] * count)
    return _union_forest_rank(endpoints, n, k, stop_at=need) >= need


def max_spanning_tree_packing(m: Multigraph) -> int:
    """Maximum number of edge-disjoint spanning trees, by incremental
    matroid-union augmentation (0 if the multigraph is disconnected)."""
    n = m.base.n
    if n <= 1:
        return 0
    k = 0
    while m.total_edges >= (k + 1) * (n - 1) and has_spanning_tree_packing(m, k + 1):
        k += 1
    return k


def spanning_tree_packing_by_partition(m: Multigraph) -> int:
    """Independent oracle: the min over vertex partitions P of
    floor(crossing-edge count / (|P| - 1)), enumerated exhaustively.
    Exact for any multigraph by the tree-packing theorem; usable for small
    vertex counts only."""
    n = m.base.n
    if n <= 1:
        return 0
    best = None
    for labels in _set_partitions(n):
        parts = max(labels) + 1
        if parts < 2:
            continue
        crossing = 0
        for e, count in enumerate(m.multiplicity):
            u, v = m.base.edges[e]
            if labels[u] != labels[v]:
                crossing += count
        value = crossing // (parts - 1)
        best = value if best is None else min(best, value)
    return best


def _set_partitions(n: int):
    """All set partitions of range(n) as restricted-growth label lists."""
    labels = [0] * n

    def rec(i: int, maxl: int):
        if i == n:
            yield list(labels)
            return
        for lab in range(maxl + 2):
            labels[i] = lab
            yield from rec(i + 1, max(maxl, lab))

    yield from rec(1, 0)


# ---------------------------------------------------------------------------
# Triangle packing (branch and bound)

BNB_BUDGET = 10**6


@dataclass
class PackingCount:
    lower: int
    upper: int

    @property
    def certified(self) -> bool:
        return self.lower == self.upper


def max_triangle_packing(m: Multigraph, budget: int = BNB_BUDGET,
                         stop_at: int | None = None) -> PackingCount:
    """Maximum number of edge-disjoint triangles; the N_e copies of each
    edge count as disjoint edges.

    Branch and bound over the candidate vertex triples with a greedy lower
    bound.  If the node budget runs out, returns an uncertified
    (lower, upper) range; with ``stop_at`` the search exits as soon as the
    lower bound reaches the target.
    """
    g = m.base
    mult = list(m.multiplicity)
    triples = []
    for u in range(g.n):
        for v in range(u + 1, g.n):
            euv = g.edge_index(u, v)
            if euv is None or mult[euv] == 0:
                continue
            for w in range(v + 1, g.n):
                evw = g.edge_index(v, w)
                euw = g.edge_index(u, w)
                if evw is None or euw is None:
                    continue
                if mult[evw] and mult[euw]:
                    triples.append((euv, evw, euw))
    if not triples:
        return PackingCount(0, 0)

    # edges relevant per suffix of the triple list, for the relaxation bound
    suffix_edges = [set() for _ in range(len(triples) + 1)]
    for i in range(len(triples) - 1, -1, -1):
        suffix_edges[i] = suffix_edges[i + 1] | set(triples[i])

    best = _greedy_triangles(triples, mult)
    if stop_at is not None and best >= stop_at:
        return PackingCount(best, best)
    nodes = 0
    budget_hit = False
    upper_seen = best

    def relax(i: int) -> int:
        return sum(mult[e] for e in suffix_edges[i]) // 3

    def dfs(i: int, count: int):
        nonlocal best, nodes, budget_hit, upper_seen
        nodes += 1
        if nodes > budget:
            budget_hit = True
            upper_seen = max(upper_seen, count + relax(i))
            return
        if i == len(triples):
            best = max(best, count)
            return
        bound = count + relax(i)
        if bound <= best or (stop_at is not None and best >= stop_at):
            return
        e1, e2, e3 = triples[i]
        most = min(mult[e1], mult[e2], mult[e3])
        for take in range(most, -1, -1):
            mult[e1] -= take
            mult[e2] -= take
            mult[e3] -= take
            dfs(i + 1, count + take)
            mult[e1] += take
            mult[e2] += take
            mult[e3] += take
            if budget_hit or (stop_at is not None and best >= stop_at):
                return

    dfs(0, 0)
    if budget_hit and (stop_at is None or best < stop_at):
        return PackingCount(best, max(best, upper_seen))
    return PackingCount(best, best)


def _greedy_triangles(triples, mult) -> int:
    work = list(mult)
    count = 0
    for e1, e2, e3 in triples:
        take = min(work[e1], work[e2], work[e3])
        work[e1] -= take
        work[e2] -= take
        work[e3] -= take
        count += take
    return count


def has_triangle_packing(m: Multigraph, k: int, budget: int = BNB_BUDGET) -> bool:
    pc = max_triangle_packing(m, budget=budget, stop_at=k)
    return pc.lower >= k


# ---------------------------------------------------------------------------
# Stopping times

KIND_PREDICATES = {
    "span": has_spanning_tree_packing,
    "tria": has_triangle_packing,
}


def stopping_times(traj: MultigraphTrajectory, ks: list[int],
                   kinds: tuple[str, ...] = ("span", "tria"),
                   max_extensions: int = 60) -> dict[str, dict[int, float]]:
    """First times the multigraph packs k edge-disjoint spanning trees /
    triangles, by binary search over the arrival index (packing numbers
    change only at arrivals).  The trajectory is extended (doubling the
    horizon) until the largest k is found; a graph that can never satisfy
    a kind (e.g. triangles on a triangle-free base) raises after
    ``max_extensions`` doublings."""
    ks = sorted(ks)
    results: dict[str, dict[int, float]] = {}
    for kind in kinds:
        pred = KIND_PREDICATES[kind]
        results[kind] = {}
        lo = 0  # packing at lo events is known to be < current k
        for k in ks:
            extensions = 0
            while not pred(traj.multigraph_at(len(traj.times)), k):
                if extensions >= max_extensions:
                    raise RuntimeError(
                        f"{kind} packing never reached k={k}; is the target attainable?"
                    )
                traj.extend(traj.horizon * 2.0)
                extensions += 1
            hi = len(traj.times)
            # invariant: pred holds at hi events, fails at lo events
            low = lo
            while low + 1 < hi:
                mid = (low + hi) // 2
                if pred(traj.multigraph_at(mid), k):
                    hi = mid
                else:
                    low = mid
            results[kind][k] = float(traj.times[hi - 1])
            lo = hi - 1  # the stopping time is nondecreasing in k
    return results


# ---------------------------------------------------------------------------
# a(k) and the Proposition 2 bounds

def a_k_eval(k: int) -> float:
    """inf over q in (0,1] of q / (1 - (1-q^3)^k), refined to ~1e-10.

    a(1) = 1 (boundary infimum of q^-2); for large k the minimizer is near
    k^(-1/3).
    """
    if k < 1:
        raise ValueError("k must be >= 1")

    def f(q: float) -> float:
        denom = -math.expm1(k * math.log1p(-q**3)) if q < 1.0 else 1.0
        return q / denom

    res = minimize_scalar(f, bounds=(1e-6, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, f(1.0)))


SPAN_BOUND = lambda k: k ** -0.5
TRIA_BOUND = lambda k: math.sqrt(math.e / (math.e - 1.0)) * k ** (-1.0 / 6.0)


@dataclass
class Prop2Report:
    kind: str
    k: int
    runs: int
    mean: float
    sd: float
    ratio: float
    ratio_se: float
    bound: float
    holds: bool
    inconclusive: bool
    mean_lower_bound: float | None = None   # k / gamma, spanning trees only
    mean_se: float | None = None
    mean_bound_holds: bool | None = None


def sample_stopping_times(g: WeightedGraph, ks: list[int], runs: int, seed,
                          kinds: tuple[str, ...] = ("span", "tria"),
                          threads: int = 1) -> dict[str, dict[int, np.ndarray]]:
    """Monte Carlo stopping times; per-run streams spawned from the seed so
    the output is independent of scheduling."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(runs)
    w_total = sum(g.weights)
    horizon0 = max(4.0 * max(ks) / w_total, 1.0 / w_total)
    out = {kind: {k: np.empty(runs) for k in ks} for kind in kinds}

    def do_run(i):
        rng = np.random.default_rng(children[i])
        traj = simulate_arrivals(g, horizon0, rng)
        st = stopping_times(traj, ks, kinds=kinds)
        for kind in kinds:
            for k in ks:
                out[kind][k][i] = st[kind][k]

    if threads <= 1:
        for i in range(runs):
            do_run(i)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            def do_chunk(t):
                for i in range(t, runs, threads):
                    do_run(i)
            list(pool.map(do_chunk, range(threads)))
    return out


def prop2_check(g: WeightedGraph, k: int, runs: int, seed, kind: str = "span",
                gamma: float | None = None, samples: np.ndarray | None = None) -> Prop2Report:
    """Check sd(T)/E T against the process-independent bound, with a
    jackknife band; for spanning trees also check E T >= k/gamma."""
    if runs < 1000 and samples is None:
        raise ValueError("prop2_check needs at least 1e3 runs")
    if samples is None:
        samples = sample_stopping_times(g, [k], runs, seed, kinds=(kind,))[kind][k]
    stats = SampleStats.from_samples(samples)
    bound = SPAN_BOUND(k) if kind == "span" else TRIA_BOUND(k)
    band = 3.0 * stats.ratio_se
    holds = stats.ratio <= bound + band
    inconclusive = (not holds) and (stats.ratio - band <= bound)
    rep = Prop2Report(kind=kind, k=k, runs=len(samples), mean=stats.mean,
                      sd=stats.sd, ratio=stats.ratio, ratio_se=stats.ratio_se,
                      bound=bound, holds=holds or inconclusive,
                      inconclusive=inconclusive)
    if kind == "span" and gamma is not None:
        rep.mean_lower_bound = k / gamma
        rep.mean_se = stats.mean_se
        rep.mean_bound_holds = stats.mean >= k / gamma - 3.0 * stats.mean_se
    return rep
