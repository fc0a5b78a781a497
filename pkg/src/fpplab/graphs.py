"""Weighted graphs, multigraphs, and exact brute-force cut computations.

Every process in this package runs on a finite connected graph with
positive edge rates.  Graphs are immutable after construction and safe to
share across worker threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

EXACT_CAP = 20  # exhaustive subset enumeration stays below 2^19 cuts


class GraphParseError(ValueError):
    """Malformed edge-list text (bad tokens, bad weight, duplicate edge)."""


class GraphValidationError(ValueError):
    """Structurally invalid graph (disconnected, self-loop, nonpositive weight)."""


class CapacityError(RuntimeError):
    """Instance too large for the exact (exhaustive) algorithms."""


@dataclass(frozen=True)
class WeightedGraph:
    """Finite connected simple graph with positive edge rates.

    ``vertices`` keeps first-appearance order from the input; edges are
    stored as index pairs ``(u, v)`` with ``u < v``.
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    _adj: tuple[tuple[tuple[int, int], ...], ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        n = len(self.vertices)
        seen = set()
        for (u, v), w in zip(self.edges, self.weights):
            if u == v:
                raise GraphValidationError(f"self-loop at vertex {self.vertices[u]!r}")
            if not (0 <= u < v < n):
                raise GraphValidationError(f"edge index pair out of range: {(u, v)}")
            if (u, v) in seen:
                raise GraphParseError(f"duplicate edge {self.vertices[u]!r}-{self.vertices[v]!r}")
            if not (w > 0):
                raise GraphValidationError(f"nonpositive weight {w} on edge {(u, v)}")
            seen.add((u, v))
        adj = [[] for _ in range(n)]
        for i, (u, v) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        object.__setattr__(self, "_adj", tuple(tuple(a) for a in adj))
        if n > 0 and not self._is_connected():
            raise GraphValidationError("graph is not connected")

    def _is_connected(self) -> bool:
        n = len(self.vertices)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == n

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int):
        """Pairs ``(v, edge_index)`` adjacent to vertex index ``u``."""
        return self._adj[u]

    def edge_index(self, u: int, v: int) -> int | None:
        for x, i in self._adj[u]:
            if x == v:
                return i
        return None

    def min_weight(self) -> float:
        return min(self.weights)

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def to_edge_list(self) -> str:
        lines = []
        for (u, v), w in zip(self.edges, self.weights):
            lines.append(f"{self.vertices[u]} {self.vertices[v]} {w!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Multigraph:
    """A base graph plus a nonnegative multiplicity per edge."""

    base: WeightedGraph
    multiplicity: tuple[int, ...]

    def __post_init__(self):
        if len(self.multiplicity) != self.base.m:
            raise ValueError("multiplicity length must match base edge count")
        if any(c < 0 for c in self.multiplicity):
            raise ValueError("multiplicities must be nonnegative")

    @property
    def total_edges(self) -> int:
        return sum(self.multiplicity)

    def add_copy(self, edge_idx: int) -> "Multigraph":
        mult = list(self.multiplicity)
        mult[edge_idx] += 1
        return Multigraph(self.base, tuple(mult))


_SIGDIGITS = re.compile(r"[0-9]")


def _significant_digits(token: str) -> int:
    digits = _SIGDIGITS.findall(token.split("e")[0].split("E")[0])
    s = "".join(digits).lstrip("0")
    return len(s) if s else 1


def parse_edge_list(text: str) -> WeightedGraph:
    """Parse edge-list text: one ``u v w`` per line, ``#`` comments, UTF-8.

    Vertex ids are assigned in first-appearance order.  Weights with more
    than 15 significant digits are rejected so serialize/parse round-trips
    stay bit-exact in double precision.
    """
    vertex_ids: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphParseError(f"line {lineno}: expected 'u v w', got {raw!r}")
        a, b, wtok = parts
        if a == b:
            raise GraphParseError(f"line {lineno}: self-loop {a!r}")
        if _significant_digits(wtok) > 15:
            raise GraphParseError(f"line {lineno}: weight {wtok!r} has more than 15 significant digits")
        try:
            w = float(wtok)
        except ValueError:
            raise GraphParseError(f"line {lineno}: bad weight {wtok!r}") from None
        if not (w > 0) or not np.isfinite(w):
            raise GraphParseError(f"line {lineno}: weight must be positive and finite, got {wtok!r}")
        for name in (a, b):
            if name not in vertex_ids:
                vertex_ids[name] = len(vertex_ids)
        u, v = sorted((vertex_ids[a], vertex_ids[b]))
        if (u, v) in set(edges):
            raise GraphParseError(f"line {lineno}: duplicate edge {a!r}-{b!r}")
        edges.append((u, v))
        weights.append(w)
    if not vertex_ids:
        raise GraphParseError("empty edge list")
    return WeightedGraph(tuple(vertex_ids), tuple(edges), tuple(weights))


def min_cut_weight(g: WeightedGraph) -> tuple[float, int]:
    """Exhaustive minimum cut: min over proper nonempty S of w(S, S^c).

    Returns ``(gamma, witness_bitmask)``.  Enumerates subsets containing
    vertex 0, which covers every bipartition once.
    """
    n = g.n
    if n > EXACT_CAP:
        raise CapacityError(
            f"min_cut_weight enumerates cuts exhaustively; |V|={n} exceeds cap {EXACT_CAP}"
        )
    if n < 2:
        raise GraphValidationError("min cut needs at least two vertices")
    best = float("inf")
    witness = 1
    full = (1 << n) - 1
    for half in range(1 << (n - 1)):
        mask = (half << 1) | 1  # vertex 0 always inside
        if mask == full:
            continue
        cut = 0.0
        for (u, v), w in zip(g.edges, g.weights):
            if ((mask >> u) & 1) != ((mask >> v) & 1):
                cut += w
        if cut < best:
            best = cut
            witness = mask
    return best, witness


# ---------------------------------------------------------------------------
# Built-in graph families (used by the CLI and the acceptance scenarios)

def path_graph(n: int) -> WeightedGraph:
    if n < 2:
        raise ValueError("path needs n >= 2")
    names = tuple(f"v{i}" for i in range(n))
    edges = tuple((i, i + 1) for i in range(n - 1))
    return WeightedGraph(names, edges, (1.0,) * (n - 1))


def complete_graph(n: int) -> WeightedGraph:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    names = tuple(f"v{i}" for i in range(n))
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    return WeightedGraph(names, edges, (1.0,) * len(edges))


def grid_graph(rows: int, cols: int) -> WeightedGraph:
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("grid needs at least two vertices")
    names = tuple(f"v{r}_{c}" for r in range(rows) for c in range(cols))
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
    edges = tuple(tuple(sorted(e)) for e in edges)
    return WeightedGraph(names, edges, (1.0,) * len(edges))


def bridge_graph(c1: int, c2: int, bridge_rate: float) -> WeightedGraph:
    """Two unit-weight cliques joined by a single bridge edge of given rate."""
    if c1 < 1 or c2 < 1:
        raise ValueError("clique sizes must be >= 1")
    if not bridge_rate > 0:
        raise ValueError("bridge rate must be positive")
    n = c1 + c2
    names = tuple(f"a{i}" for i in range(c1)) + tuple(f"b{i}" for i in range(c2))
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    for i in range(c1):
        for j in range(i + 1, c1):
            edges.append((i, j))
            weights.append(1.0)
    for i in range(c2):
        for j in range(i + 1, c2):
            edges.append((c1 + i, c1 + j))
            weights.append(1.0)
    # bridge connects the last vertex of clique 1 to the first of clique 2
    edges.append((c1 - 1, c1))
    weights.append(float(bridge_rate))
    return WeightedGraph(names, tuple(edges), tuple(weights))


def random_gnp_graph(n: int, p: float, weight_range: tuple[float, float],
                     rng: np.random.Generator) -> WeightedGraph:
    """Connected G(n,p) with uniform weights in ``weight_range`` (resamples
    until connected)."""
    lo, hi = weight_range
    if not (0 < lo <= hi):
        raise ValueError("weight range must be positive")
    names = tuple(f"v{i}" for i in range(n))
    for _ in range(1000):
        edges = []
        weights = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p:
                    edges.append((i, j))
                    weights.append(float(lo + (hi - lo) * rng.random()))
        try:
            return WeightedGraph(names, tuple(edges), tuple(weights))
        except (GraphValidationError, GraphParseError):
            continue
    raise RuntimeError(f"could not sample a connected G({n},{p}) in 1000 tries")


FAMILIES = {
    "path": path_graph,
    "complete": complete_graph,
    "grid": grid_graph,
    "bridge": bridge_graph,
    "random_gnp": random_gnp_graph,
}
