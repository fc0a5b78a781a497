"""First passage percolation on a weighted graph.

Traversal times are independent Exponential(rate w_e).  The percolation
time X(v', v'') is the shortest-path length under those times, Xi is the
largest single-edge time on the minimizing path, and the whole model can
be recast as an increasing subset-valued chain solved exactly by
:mod:`fpplab.chain`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .chain import ABS_TOL, ChainSpec, ExactSolution
from .graphs import EXACT_CAP, CapacityError, WeightedGraph


def traversal_from_uniform(u, w):
    """Inverse-transform map: xi = -ln(u)/w turns Uniform(0,1) draws into
    Exponential(rate w) traversal times."""
    return -np.log(u) / w


def sample_traversal(g: WeightedGraph, rng: np.random.Generator) -> np.ndarray:
    """One traversal-time vector, independent Exp(w_e) per edge."""
    u = rng.random(g.m)
    while np.any(u == 0.0):  # measure-zero guard: keep xi strictly positive
        zeros = u == 0.0
        u[zeros] = rng.random(int(zeros.sum()))
    return traversal_from_uniform(u, g.weight_array())


@dataclass(frozen=True)
class FppResult:
    X: float
    path: tuple[int, ...]        # vertex sequence v' .. v''
    path_edges: tuple[int, ...]  # edge indices along the path
    Xi: float


def shortest_path(g: WeightedGraph, xi: np.ndarray, source: int, target: int) -> FppResult:
    """Dijkstra under edge lengths ``xi`` with a deterministic tie-break:
    among minimal-length paths, the lexicographically smallest vertex
    sequence wins, so the minimizing path (hence Xi) is a function of xi."""
    if source == target:
        raise ValueError("source and target must differ")
    settled = set()
    heap = [(0.0, (source,))]
    while heap:
        dist, path = heapq.heappop(heap)
        v = path[-1]
        if v in settled:
            continue
        settled.add(v)
        if v == target:
            edges = tuple(g.edge_index(path[i], path[i + 1]) for i in range(len(path) - 1))
            return FppResult(X=dist, path=path, path_edges=edges,
                            Xi=max(float(xi[e]) for e in edges))
        for u, e in g.neighbors(v):
            if u not in settled:
                heapq.heappush(heap, (dist + float(xi[e]), path + (u,)))
    raise RuntimeError("target unreachable; connected graphs cannot get here")


# ---------------------------------------------------------------------------
# Vectorized Monte Carlo batches (scipy Dijkstra; cross-checked in tests
# against shortest_path above)

@dataclass
class FppBatch:
    X: np.ndarray
    Xi: np.ndarray
    path_len: np.ndarray

    def rows(self):
        for i in range(len(self.X)):
            yield i, float(self.X[i]), float(self.Xi[i]), int(self.path_len[i])


class _BatchSampler:
    """Reusable per-graph machinery for fast repeated FPP realizations."""

    def __init__(self, g: WeightedGraph):
        self.g = g
        rows = np.fromiter((u for u, _ in g.edges), dtype=np.int32, count=g.m)
        cols = np.fromiter((v for _, v in g.edges), dtype=np.int32, count=g.m)
        coo_rows = np.concatenate([rows, cols])
        coo_cols = np.concatenate([cols, rows])
        tagged = csr_matrix(
            (np.arange(2 * g.m, dtype=np.float64) + 1.0, (coo_rows, coo_cols)),
            shape=(g.n, g.n),
        )
        self._perm = (tagged.data - 1.0).astype(np.intp)
        self._csr = tagged
        self._edge_of_pair = {}
        for i, (u, v) in enumerate(g.edges):
            self._edge_of_pair[(u, v)] = i
            self._edge_of_pair[(v, u)] = i

    def run(self, xi: np.ndarray, source: int, target: int):
        doubled = np.concatenate([xi, xi])
        self._csr.data = doubled[self._perm]
        dist, pred = _csgraph_dijkstra(
            self._csr, directed=True, indices=source, return_predecessors=True
        )
        x = float(dist[target])
        best = 0.0
        n_edges = 0
        v = target
        while v != source:
            p = int(pred[v])
            e = self._edge_of_pair[(p, v)]
            best = max(best, float(xi[e]))
            n_edges += 1
            v = p
        return x, best, n_edges


def sample_fpp_batch(g: WeightedGraph, source: int, target: int, runs: int,
                     seed, threads: int = 1) -> FppBatch:
    """``runs`` independent FPP realizations with per-run substreams
    spawned from ``seed``; output order is fixed by run index, so results
    do not depend on the thread count."""
    sampler = _BatchSampler(g)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(runs)
    X = np.empty(runs)
    Xi = np.empty(runs)
    path_len = np.empty(runs, dtype=np.int64)

    def do_run(i):
        rng = np.random.default_rng(children[i])
        xi = sample_traversal(g, rng)
        X[i], Xi[i], path_len[i] = sampler.run(xi, source, target)

    if threads <= 1:
        for i in range(runs):
            do_run(i)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            local = [_BatchSampler(g) for _ in range(threads)]

            def do_chunk(t):
                for i in range(t, runs, threads):
                    rng = np.random.default_rng(children[i])
                    xi = sample_traversal(g, rng)
                    X[i], Xi[i], path_len[i] = local[t].run(xi, source, target)

            list(pool.map(do_chunk, range(threads)))
    return FppBatch(X=X, Xi=Xi, path_len=path_len)


# ---------------------------------------------------------------------------
# Subset-chain formulation

def fpp_chain_spec(g: WeightedGraph, source: int, target: int) -> ChainSpec:
    """The reached-vertex-set chain: from S, vertex y joins at aggregate
    rate w(S, y) = sum of rates of frontier edges into y."""
    if g.n > EXACT_CAP:
        raise CapacityError(f"|V|={g.n} exceeds exact-solver cap {EXACT_CAP}")
    if source == target:
        raise ValueError("source and target must differ")
    target_bit = 1 << target

    def transitions(mask: int):
        rates: dict[int, float] = {}
        for s in range(g.n):
            if not (mask >> s) & 1:
                continue
            for y, e in g.neighbors(s):
                if not (mask >> y) & 1:
                    rates[y] = rates.get(y, 0.0) + g.weights[e]
        return [(mask | (1 << y), w) for y, w in sorted(rates.items())]

    return ChainSpec(
        initial=1 << source,
        transitions=transitions,
        is_target=lambda mask: bool(mask & target_bit),
    )


@dataclass
class Prop4Report:
    var_T: float
    E_T: float
    w_min: float
    bound: float
    holds: bool


def prop4_check(sol: ExactSolution, g: WeightedGraph, tol: float = ABS_TOL) -> Prop4Report:
    """var X <= E X / w_min, with w_min the smallest edge rate."""
    w_min = g.min_weight()
    bound = sol.E_T / w_min
    return Prop4Report(var_T=sol.var_T, E_T=sol.E_T, w_min=w_min, bound=bound,
                       holds=sol.var_T <= bound + tol)


# ---------------------------------------------------------------------------
# Resampling coupling: redraw the traversal times falling in [a, b]

@dataclass
class CouplingSample:
    a: float
    b: float
    xi: np.ndarray
    xi_prime: np.ndarray
    D_ab: tuple[int, ...]  # edges of the minimizing path with xi in [a, b]
    X: float
    X_prime: float

    def increment_bound(self) -> float:
        """Right side of the pathwise bound X' - X <= sum over D_ab of
        (xi' - xi)."""
        return float(sum(self.xi_prime[e] - self.xi[e] for e in self.D_ab))


def conditioned_exponential(w: float, a: float, b: float, u: float) -> float:
    """Inverse-CDF draw of Exponential(w) conditioned to [a, b]; exact, no
    rejection loop."""
    sa = math.exp(-w * a)
    sb = math.exp(-w * b)
    return -math.log(sa - u * (sa - sb)) / w


def coupled_resample(g: WeightedGraph, xi: np.ndarray, a: float, b: float,
                     rng: np.random.Generator, source: int = 0,
                     target: int | None = None) -> CouplingSample:
    """Couple xi with a copy xi' that agrees off [a, b] and redraws the
    times in [a, b] from the conditioned exponential law."""
    if not (0 < a < b):
        raise ValueError("need 0 < a < b")
    if target is None:
        target = g.n - 1
    xi_prime = np.array(xi, dtype=float)
    for e in range(g.m):
        if a <= xi[e] <= b:
            xi_prime[e] = conditioned_exponential(g.weights[e], a, b, rng.random())
    base = shortest_path(g, xi, source, target)
    re = shortest_path(g, xi_prime, source, target)
    d_ab = tuple(e for e in base.path_edges if a <= xi[e] <= b)
    return CouplingSample(a=a, b=b, xi=np.asarray(xi, dtype=float), xi_prime=xi_prime,
                          D_ab=d_ab, X=base.X, X_prime=re.X)


def submultiplicativity_probe(samples: np.ndarray, y1: float, y2: float) -> dict:
    """Empirical tail check P(X > y1+y2) <= P(X > y1) P(X > y2) plus a
    3-sigma binomial band.  Advisory: reports, does not assert."""
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    report = {"n": n, "y1": y1, "y2": y2}
    if n < 10_000:
        report["warning"] = "fewer than 1e4 samples; tail estimates imprecise"
    p12 = float(np.mean(samples > y1 + y2))
    p1 = float(np.mean(samples > y1))
    p2 = float(np.mean(samples > y2))
    var12 = p12 * (1 - p12) / n
    var1 = p1 * (1 - p1) / n
    var2 = p2 * (1 - p2) / n
    band = 3.0 * math.sqrt(var12 + p2**2 * var1 + p1**2 * var2)
    report.update({
        "tail_sum": p12,
        "tail_product": p1 * p2,
        "band": band,
        "holds_within_band": p12 <= p1 * p2 + band,
    })
    return report
