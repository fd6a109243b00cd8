"""Simple undirected graphs, BFS distances and path-sparsity metrics.

The sparsity measures here are the ones used to state the mixing conditions:
for a vertex ``v`` and a path budget ``l``

* ``maximal_path_density(g, v, l)`` is the largest degree sum over
  self-avoiding paths that start at ``v`` and have at most ``l`` edges
  (the single-vertex path counts, so the value is at least ``deg(v)``);
* ``avg_path_degree(g, v, l) = (m - deg(v)) / l``;
* ``max_avg_degree(g, l)`` is the maximum of the above over all vertices.

Path enumeration is exhaustive and therefore exponential in ``l``.  Callers
are expected to keep ``l`` logarithmic in the graph size.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "UNREACHABLE",
    "distance",
    "bfs_distances",
    "ball",
    "sphere",
    "maximal_path_density",
    "avg_path_degree",
    "max_avg_degree",
    "SparsityReport",
    "sparsity_report",
    "path_density_composition_gap",
    "generate",
]


class GraphError(ValueError):
    """Raised for malformed graphs or infeasible generator parameters."""


class _Unreachable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __bool__(self):
        return False


#: Returned by :func:`distance` for pairs in different components.
UNREACHABLE = _Unreachable()


class Graph:
    """Immutable simple undirected graph on vertices ``0..n-1``.

    ``vertex_order`` is a permutation of the vertices; it defines the total
    order used by the self-avoiding-walk tree to fix cycle-closing copies.
    It defaults to numeric label order.
    """

    __slots__ = ("_n", "_adj", "_edges", "_edge_index", "_order", "_rank")

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = (), vertex_order=None):
        n = int(n)
        if n < 0:
            raise GraphError("vertex count must be non-negative")
        adj: list[set[int]] = [set() for _ in range(n)]
        seen = set()
        ordered_edges = []
        for e in edges:
            if len(e) != 2:
                raise GraphError(f"edge {e!r} does not have two endpoints")
            u, v = int(e[0]), int(e[1])
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) references a vertex outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"parallel edge {key}")
            seen.add(key)
            ordered_edges.append(key)
            adj[u].add(v)
            adj[v].add(u)
        self._n = n
        self._adj = tuple(tuple(sorted(a)) for a in adj)
        self._edges = tuple(sorted(ordered_edges))
        self._edge_index = {e: i for i, e in enumerate(self._edges)}
        if vertex_order is None:
            order = tuple(range(n))
        else:
            order = tuple(int(x) for x in vertex_order)
            if sorted(order) != list(range(n)):
                raise GraphError("vertex_order must be a permutation of all vertices")
        self._order = order
        rank = [0] * n
        for r, v in enumerate(order):
            rank[v] = r
        self._rank = tuple(rank)

    @property
    def n(self) -> int:
        return self._n

    @property
    def vertex_count(self) -> int:
        return self._n

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return self._adj

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Edges as sorted ``(u, v)`` pairs with ``u < v``, in lexicographic order."""
        return self._edges

    @property
    def vertex_order(self) -> tuple[int, ...]:
        return self._order

    def rank(self, v: int) -> int:
        """Position of ``v`` in :attr:`vertex_order`."""
        return self._rank[v]

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=int)

    def max_degree(self) -> int:
        return max((len(a) for a in self._adj), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_index

    def edge_index(self, u: int, v: int) -> int:
        """Index of edge ``{u, v}`` in :attr:`edges`; ``KeyError`` if absent."""
        return self._edge_index[(min(u, v), max(u, v))]

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Graph with vertex ``v`` renamed ``perm[v]``; the vertex order is carried along."""
        perm = list(perm)
        return Graph(
            self._n,
            [(perm[u], perm[v]) for u, v in self._edges],
            vertex_order=[perm[v] for v in self._order],
        )

    def with_edge(self, u: int, v: int) -> "Graph":
        return Graph(self._n, list(self._edges) + [(u, v)], vertex_order=self._order)

    def is_connected(self) -> bool:
        if self._n == 0:
            return True
        return len(bfs_distances(self, 0)) == self._n

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self._n, self._edges, self._order) == (other._n, other._edges, other._order)

    def __hash__(self):
        return hash((self._n, self._edges, self._order))

    def __repr__(self):
        return f"Graph(n={self._n}, edges={len(self._edges)})"


def bfs_distances(g: Graph, source: int, max_depth: int | None = None) -> dict[int, int]:
    """Distances from ``source`` to every reachable vertex (up to ``max_depth``)."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        if max_depth is not None and du >= max_depth:
            continue
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = du + 1
                queue.append(w)
    return dist


def distance(g: Graph, u: int, v: int):
    """Shortest-path length between ``u`` and ``v``, or :data:`UNREACHABLE`."""
    _check_vertex(g, u)
    _check_vertex(g, v)
    return bfs_distances(g, u).get(v, UNREACHABLE)


def ball(g: Graph, v: int, l: int) -> frozenset[int]:
    """Vertices within distance ``l`` of ``v``."""
    _check_vertex(g, v)
    return frozenset(bfs_distances(g, v, max_depth=l))


def sphere(g: Graph, v: int, l: int) -> frozenset[int]:
    """Vertices at distance exactly ``l`` from ``v``."""
    _check_vertex(g, v)
    return frozenset(u for u, d in bfs_distances(g, v, max_depth=l).items() if d == l)


def maximal_path_density(g: Graph, v: int, l: int) -> int:
    """Largest degree sum along a self-avoiding path from ``v`` with at most ``l`` edges.

    Exhaustive DFS; cost grows like ``max_degree ** l``.
    """
    _check_vertex(g, v)
    if l < 0:
        raise ValueError("path budget l must be non-negative")
    adj = g.adjacency
    deg = [len(a) for a in adj]
    best = deg[v]
    on_path = [False] * g.n
    on_path[v] = True
    # iterative DFS: stack of (vertex, depth, running sum, neighbor iterator)
    stack = [(v, 0, deg[v], iter(adj[v]))]
    while stack:
        u, depth, total, it = stack[-1]
        if depth == l:
            stack.pop()
            on_path[u] = False
            continue
        for w in it:
            if not on_path[w]:
                s = total + deg[w]
                if s > best:
                    best = s
                on_path[w] = True
                stack.append((w, depth + 1, s, iter(adj[w])))
                break
        else:
            stack.pop()
            on_path[u] = False
    return best


def avg_path_degree(g: Graph, v: int, l: int) -> float:
    """``(maximal_path_density(g, v, l) - deg(v)) / l`` for ``l >= 1``."""
    if l < 1:
        raise ValueError("average path degree needs l >= 1")
    return (maximal_path_density(g, v, l) - g.degree(v)) / l


def max_avg_degree(g: Graph, l: int) -> float:
    """Maximum of :func:`avg_path_degree` over all vertices (0.0 for the empty graph)."""
    if l < 1:
        raise ValueError("maximum average degree needs l >= 1")
    return max((avg_path_degree(g, v, l) for v in range(g.n)), default=0.0)


@dataclass(frozen=True)
class SparsityReport:
    v: int
    l: int
    m: int
    delta_avg: float
    Delta: float


def sparsity_report(g: Graph, v: int, l: int) -> SparsityReport:
    return SparsityReport(v, l, maximal_path_density(g, v, l), avg_path_degree(g, v, l),
                          max_avg_degree(g, l))


def path_density_composition_gap(g: Graph, v: int, l: int, j: int) -> int:
    """Slack in ``m(v, j l) <= j max_u (m(u, l) - deg u) + deg v``; negative means violated."""
    if l < 1 or j < 1:
        raise ValueError("l and j must be positive")
    worst = max(maximal_path_density(g, u, l) - g.degree(u) for u in range(g.n))
    return j * worst + g.degree(v) - maximal_path_density(g, v, j * l)


def _check_vertex(g: Graph, v: int) -> None:
    if not 0 <= v < g.n:
        raise GraphError(f"vertex {v} not in graph with {g.n} vertices")


# ---------------------------------------------------------------------------
# generators


def generate(kind: str, size: int = 0, *, d: int | None = None, p: float | None = None,
             depth: int | None = None, seed: int | None = None) -> Graph:
    """Build a graph of the given ``kind``.

    kinds: ``path``, ``cycle``, ``complete``, ``star`` (``size`` leaves),
    ``grid`` (``size`` x ``size``), ``random_regular`` (needs ``d``),
    ``erdos_renyi`` (needs ``p``, or ``d`` meaning ``p = d / size``),
    ``complete_binary_tree`` and ``regular_tree`` (needs ``depth``; the
    latter needs ``d`` and gives the root ``d`` children and every other
    internal node ``d - 1``).

    Random kinds are deterministic given ``seed``.
    """
    if kind == "path":
        return Graph(size, [(i, i + 1) for i in range(size - 1)])
    if kind == "cycle":
        if size < 3:
            raise GraphError("a cycle needs at least 3 vertices")
        return Graph(size, [(i, (i + 1) % size) for i in range(size)])
    if kind == "complete":
        return Graph(size, [(i, j) for i in range(size) for j in range(i + 1, size)])
    if kind == "star":
        return Graph(size + 1, [(0, i) for i in range(1, size + 1)])
    if kind == "grid":
        edges = []
        for r in range(size):
            for c in range(size):
                v = r * size + c
                if c + 1 < size:
                    edges.append((v, v + 1))
                if r + 1 < size:
                    edges.append((v, v + size))
        return Graph(size * size, edges)
    if kind == "complete_binary_tree":
        if depth is None or depth < 0:
            raise GraphError("complete_binary_tree needs depth >= 0")
        n = 2 ** (depth + 1) - 1
        return Graph(n, [((i - 1) // 2, i) for i in range(1, n)])
    if kind == "regular_tree":
        if d is None or d < 2 or depth is None or depth < 0:
            raise GraphError("regular_tree needs d >= 2 and depth >= 0")
        return _regular_tree(d, depth)
    if kind == "random_regular":
        if d is None or not 0 <= d < size:
            raise GraphError("random_regular needs 0 <= d < size")
        if (size * d) % 2:
            raise GraphError("random_regular needs size * d even")
        import networkx as nx

        h = nx.random_regular_graph(d, size, seed=seed)
        return Graph(size, h.edges())
    if kind == "erdos_renyi":
        if p is None:
            if d is None or size == 0:
                raise GraphError("erdos_renyi needs p or d")
            p = d / size
        if not 0.0 <= p <= 1.0:
            raise GraphError("edge probability must lie in [0, 1]")
        rng = np.random.default_rng(seed)
        iu, ju = np.triu_indices(size, k=1)
        keep = rng.random(iu.size) < p
        return Graph(size, zip(iu[keep].tolist(), ju[keep].tolist()))
    raise GraphError(f"unknown graph kind {kind!r}")


def _regular_tree(d: int, depth: int) -> Graph:
    edges = []
    frontier = [0]
    n = 1
    for level in range(depth):
        nxt = []
        k = d if level == 0 else d - 1
        for u in frontier:
            for _ in range(k):
                edges.append((u, n))
                nxt.append(n)
                n += 1
        frontier = nxt
    return Graph(n, edges)
