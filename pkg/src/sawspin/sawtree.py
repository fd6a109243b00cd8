"""Self-avoiding-walk trees with boundary conditions.

Every node of ``T_saw(v)`` is a self-avoiding walk in ``G`` starting at
``v``; its children extend the walk by one edge.  When the walk can be
extended to a vertex ``w`` already on it, a leaf copy of ``w`` is added
and fixed: ``+`` if the edge closing the cycle is larger than the edge
that left ``w`` to start the cycle, ``-`` otherwise.  Edges are compared
by the sum of their endpoint ranks under the graph's vertex order (ties
broken by the sorted rank pair).  Copies of vertices with a boundary spin
are fixed leaves.

Trees are stored flat, in breadth-first order, so every level is a
contiguous slice and each node's children are contiguous.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, NamedTuple

import numpy as np

from .model import EdgePotential, Spin, SpinSystem, VertexField

__all__ = [
    "NodeStatus",
    "SawNode",
    "SawTree",
    "TreeStats",
    "build_saw_tree",
    "tree_stats",
    "to_dot",
    "to_outline",
    "normalize_boundary",
    "walk_tree",
    "sphere_bound_gap",
    "ball_composition_gap",
    "size_bound_violations",
]


class NodeStatus(IntEnum):
    FREE = 0
    PLUS = 1
    MINUS = 2
    TRUNCATED = 3  # free node at the depth limit whose subtree was not built

    @property
    def fixed(self) -> bool:
        return self in (NodeStatus.PLUS, NodeStatus.MINUS)

    @classmethod
    def of_spin(cls, s) -> "NodeStatus":
        return cls.PLUS if int(s) > 0 else cls.MINUS


class SawNode(NamedTuple):
    index: int
    origin_vertex: int
    status: NodeStatus
    parent_edge_potential: EdgePotential | None
    children: tuple[int, ...]
    depth: int


@dataclass(frozen=True, eq=False)
class SawTree:
    """Rooted tree of spins stored as parallel arrays in BFS order.

    ``beta[i]`` is the potential of the edge from ``parent[i]`` to ``i``,
    read parent first; ``h[i]`` is ``(h(+), h(-))`` of node ``i``.
    """

    origin: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    status: np.ndarray
    beta: np.ndarray
    h: np.ndarray
    child_start: np.ndarray
    child_count: np.ndarray
    cycle_leaf: np.ndarray
    boundary: Mapping[int, int] = field(default_factory=dict)
    depth_limit: int | None = None
    source_graph: object = None

    @property
    def size(self) -> int:
        return int(self.origin.size)

    @property
    def root_vertex(self) -> int:
        return int(self.origin[0])

    @property
    def height(self) -> int:
        return int(self.depth[-1])

    @property
    def root(self) -> SawNode:
        return self.node(0)

    def node(self, i: int) -> SawNode:
        s, c = int(self.child_start[i]), int(self.child_count[i])
        pot = None if i == 0 else EdgePotential(*map(float, self.beta[i]))
        return SawNode(i, int(self.origin[i]), NodeStatus(int(self.status[i])), pot,
                       tuple(range(s, s + c)), int(self.depth[i]))

    def children(self, i: int) -> range:
        s = int(self.child_start[i])
        return range(s, s + int(self.child_count[i]))

    def vertex_field(self, i: int) -> VertexField:
        return VertexField(float(self.h[i, 0]), float(self.h[i, 1]))

    def level_slices(self) -> list[slice]:
        """One slice per depth, in BFS order."""
        bounds = np.searchsorted(self.depth, np.arange(self.height + 2))
        return [slice(int(bounds[k]), int(bounds[k + 1])) for k in range(self.height + 1)]

    def sphere_size(self, t: int) -> int:
        return int(np.count_nonzero(self.depth == t))

    def subtree_mask(self, i: int) -> np.ndarray:
        """Boolean mask of ``i`` and all of its descendants."""
        mask = np.zeros(self.size, dtype=bool)
        mask[i] = True
        # BFS order: every descendant comes after its parent
        for j in range(i + 1, self.size):
            if mask[self.parent[j]]:
                mask[j] = True
        return mask

    def select(self, keep: np.ndarray, h=None) -> "SawTree":
        """Subtree on the nodes in ``keep`` (must be closed under taking parents)."""
        keep = np.asarray(keep, dtype=bool)
        idx = np.flatnonzero(keep)
        remap = np.full(self.size, -1, dtype=int)
        remap[idx] = np.arange(idx.size)
        parent = np.where(self.parent[idx] >= 0, remap[np.maximum(self.parent[idx], 0)], -1)
        if np.any((self.parent[idx] >= 0) & (parent < 0)):
            raise ValueError("kept set is not closed under parents")
        child_count = np.bincount(parent[1:], minlength=idx.size) if idx.size > 1 else np.zeros(idx.size, int)
        child_start = _child_starts(parent, child_count)
        return SawTree(
            origin=self.origin[idx], parent=parent, depth=self.depth[idx], status=self.status[idx],
            beta=self.beta[idx], h=(self.h if h is None else h)[idx],
            child_start=child_start, child_count=child_count, cycle_leaf=self.cycle_leaf[idx],
            boundary=self.boundary, depth_limit=self.depth_limit, source_graph=self.source_graph,
        )

    def subtree(self, i: int) -> "SawTree":
        """Tree of ``i`` and its descendants, rooted at ``i``."""
        idx = np.flatnonzero(self.subtree_mask(i))
        remap = np.full(self.size, -1, dtype=int)
        remap[idx] = np.arange(idx.size)
        parent = remap[self.parent[idx]]
        parent[0] = -1
        child_count = self.child_count[idx]
        beta = self.beta[idx].astype(float, copy=True)
        beta[0] = np.nan
        return SawTree(
            origin=self.origin[idx], parent=parent, depth=self.depth[idx] - self.depth[i],
            status=self.status[idx], beta=beta, h=self.h[idx], child_start=_child_starts(parent, child_count),
            child_count=child_count, cycle_leaf=self.cycle_leaf[idx], boundary=self.boundary,
            source_graph=self.source_graph,
        )

    @classmethod
    def from_parents(cls, parent, beta, h, status=None) -> "SawTree":
        """Arbitrary rooted tree from a BFS-ordered parent array (root first, ``parent[0] = -1``)."""
        parent = np.asarray(parent, dtype=int)
        n = parent.size
        if n == 0 or parent[0] != -1 or np.any(parent[1:] < 0) or np.any(np.diff(parent[1:]) < 0):
            raise ValueError("parent array must be BFS-ordered with the root first")
        if np.any(parent[1:] >= np.arange(1, n)):
            raise ValueError("parents must precede their children")
        depth = np.zeros(n, dtype=int)
        for i in range(1, n):
            depth[i] = depth[parent[i]] + 1
        if np.any(np.diff(depth) < 0):
            raise ValueError("parent array is not in BFS order")
        child_count = np.bincount(parent[1:], minlength=n) if n > 1 else np.zeros(1, int)
        beta = np.array(beta, dtype=float).reshape(n, 4)
        beta[0] = np.nan
        return cls(
            origin=np.arange(n), parent=parent, depth=depth,
            status=np.zeros(n, dtype=np.int8) if status is None else np.asarray(status, dtype=np.int8),
            beta=beta, h=np.array(h, dtype=float).reshape(n, 2),
            child_start=_child_starts(parent, child_count), child_count=child_count,
            cycle_leaf=np.zeros(n, dtype=bool),
        )


def _child_starts(parent: np.ndarray, child_count: np.ndarray) -> np.ndarray:
    start = np.zeros(parent.size, dtype=int)
    if parent.size > 1:
        # children of node p occupy a contiguous run starting at the first j with parent[j] == p
        first = np.searchsorted(parent[1:], np.arange(parent.size)) + 1
        start = np.where(child_count > 0, first, 0)
    return start


def normalize_boundary(boundary) -> dict[int, int]:
    """Boundary as ``{vertex: +1 or -1}`` from a mapping or an iterable of pairs."""
    if not boundary:
        return {}
    items = boundary.items() if isinstance(boundary, Mapping) else boundary
    return {int(v): int(Spin.parse(s)) for v, s in items}


def _edge_key(g, a: int, b: int) -> tuple[int, int, int]:
    ra, rb = g.rank(a), g.rank(b)
    lo, hi = (ra, rb) if ra < rb else (rb, ra)
    return (lo + hi, lo, hi)


def build_saw_tree(system: SpinSystem, v: int, boundary=None, depth_limit: int | None = None) -> SawTree:
    """Self-avoiding-walk tree of ``system`` rooted at ``v`` under ``boundary``.

    With ``depth_limit`` the tree is built level by level and stops there;
    free nodes at the limit that would have children are tagged
    ``TRUNCATED``.
    """
    g = system.graph
    if not 0 <= v < g.n:
        raise ValueError(f"vertex {v} not in graph")
    if depth_limit is not None and depth_limit < 0:
        raise ValueError("depth_limit must be non-negative")
    bnd = normalize_boundary(boundary)
    adj = g.adjacency
    nbr = [[(w, tuple(system.oriented_beta(u, w))) for w in adj[u]] for u in range(g.n)]
    hs = [tuple(r) for r in system.h]

    origin = [v]
    parent = [-1]
    depth = [0]
    mask = [1 << v]
    if v in bnd:
        status = [NodeStatus.of_spin(bnd[v])]
    elif depth_limit == 0 and adj[v]:
        status = [NodeStatus.TRUNCATED]
    else:
        status = [NodeStatus.FREE]
    beta = [(np.nan,) * 4]
    cycle = [False]
    child_start = [0]
    child_count = [0]

    frontier = [0] if status[0] == NodeStatus.FREE else []
    level = 0
    while frontier and (depth_limit is None or level < depth_limit):
        nxt = []
        last = depth_limit is not None and level + 1 == depth_limit
        for i in frontier:
            u = origin[i]
            pv = origin[parent[i]] if i else -1
            m = mask[i]
            closures = []
            child_start[i] = len(origin)
            for w, row in nbr[u]:
                if w == pv:
                    continue
                if m >> w & 1:
                    closures.append((w, row))
                    continue
                origin.append(w)
                parent.append(i)
                depth.append(level + 1)
                mask.append(m | (1 << w))
                beta.append(row)
                cycle.append(False)
                child_start.append(0)
                child_count.append(0)
                if w in bnd:
                    status.append(NodeStatus.of_spin(bnd[w]))
                elif last:
                    status.append(NodeStatus.TRUNCATED if len(adj[w]) > 1 else NodeStatus.FREE)
                else:
                    status.append(NodeStatus.FREE)
                    nxt.append(len(origin) - 1)
            for w, row in closures:
                # successor of w on the walk: the vertex right below w's copy on the root path
                below, cur = i, i
                while origin[cur] != w:
                    below, cur = cur, parent[cur]
                larger = _edge_key(g, u, w) > _edge_key(g, w, origin[below])
                origin.append(w)
                parent.append(i)
                depth.append(level + 1)
                mask.append(m)
                beta.append(row)
                cycle.append(True)
                child_start.append(0)
                child_count.append(0)
                status.append(NodeStatus.PLUS if larger else NodeStatus.MINUS)
            child_count[i] = len(origin) - child_start[i]
        frontier = nxt
        level += 1

    origin_a = np.array(origin, dtype=int)
    return SawTree(
        origin=origin_a,
        parent=np.array(parent, dtype=int),
        depth=np.array(depth, dtype=int),
        status=np.array(status, dtype=np.int8),
        beta=np.array(beta, dtype=float),
        h=np.array(hs, dtype=float).reshape(g.n, 2)[origin_a],
        child_start=np.array(child_start, dtype=int),
        child_count=np.array(child_count, dtype=int),
        cycle_leaf=np.array(cycle, dtype=bool),
        boundary=bnd,
        depth_limit=depth_limit,
        source_graph=g,
    )


@dataclass(frozen=True)
class TreeStats:
    node_count: int
    sphere_sizes: tuple[int, ...]
    max_depth: int
    fixed_count: int
    cycle_leaves: int
    truncated_count: int


def tree_stats(t: SawTree) -> TreeStats:
    st = t.status
    return TreeStats(
        node_count=t.size,
        sphere_sizes=tuple(int(x) for x in np.bincount(t.depth)),
        max_depth=t.height,
        fixed_count=int(np.count_nonzero((st == NodeStatus.PLUS) | (st == NodeStatus.MINUS))),
        cycle_leaves=int(np.count_nonzero(t.cycle_leaf)),
        truncated_count=int(np.count_nonzero(st == NodeStatus.TRUNCATED)),
    )


_MARK = {NodeStatus.FREE: "", NodeStatus.PLUS: "+", NodeStatus.MINUS: "-", NodeStatus.TRUNCATED: "..."}


def to_outline(t: SawTree) -> str:
    """Indented text rendering, one node per line."""
    lines = []
    stack = [0]
    while stack:
        i = stack.pop()
        s = NodeStatus(int(t.status[i]))
        tag = _MARK[s]
        if t.cycle_leaf[i]:
            tag += " (cycle)"
        lines.append("  " * int(t.depth[i]) + f"{int(t.origin[i])}{(' ' + tag) if tag else ''}")
        stack.extend(reversed(t.children(i)))
    return "\n".join(lines)


def to_dot(t: SawTree, name: str = "saw") -> str:
    """Graphviz DOT rendering; fixed nodes are labelled with their spin."""
    out = [f"digraph {name} {{"]
    for i in range(t.size):
        s = NodeStatus(int(t.status[i]))
        label = f"{int(t.origin[i])}{_MARK[s]}"
        shape = "box" if s.fixed else ("diamond" if s == NodeStatus.TRUNCATED else "ellipse")
        out.append(f'  n{i} [label="{label}", shape={shape}];')
    for i in range(1, t.size):
        out.append(f"  n{int(t.parent[i])} -> n{i};")
    out.append("}")
    return "\n".join(out)


def walk_tree(g, v: int, depth: int) -> SawTree:
    """Self-avoiding-walk tree of ``v`` in ``g`` to ``depth``, without potentials."""
    from .model import make_ising

    return build_saw_tree(make_ising(g, 0.0), v, depth_limit=depth)


def _level_counts(t: SawTree, upto: int) -> np.ndarray:
    return np.bincount(t.depth, minlength=upto + 1)[: upto + 1]


def sphere_bound_gap(g, v: int, l: int) -> float | None:
    """Slack in ``|S(T_saw(v), l+1)| <= deg(v) (delta(v, l) - 1)^l``.

    ``None`` when the bound is not claimed (``delta(v, l) < 2``).
    """
    from .graph import avg_path_degree

    delta = avg_path_degree(g, v, l)
    if delta < 2:
        return None
    count = int(_level_counts(walk_tree(g, v, l + 1), l + 1)[l + 1])
    return g.degree(v) * (delta - 1) ** l - count


def ball_composition_gap(g, v: int, l: int, j: int) -> int:
    """Slack in ``|V(T_saw(v), j l)| <= (max_u |V(T_saw(u), l)|)^j``."""
    big = int(_level_counts(walk_tree(g, v, j * l), j * l).sum())
    small = max(int(_level_counts(walk_tree(g, u, l), l).sum()) for u in range(g.n))
    return small ** j - big


def size_bound_violations(g, ls=(1, 2, 3), js=(1, 2, 3)) -> dict[str, int]:
    """Count violations of the path-density, sphere and ball bounds on ``g``.

    One walk tree per vertex (to the deepest budget needed) and one path
    density per ``(vertex, budget)`` are computed and shared by all checks.
    """
    from .graph import maximal_path_density

    top = max(max(l * j for l in ls for j in js), max(ls) + 1)
    levels = [_level_counts(walk_tree(g, v, top), top) for v in range(g.n)]
    budgets = {l * j for l in ls for j in js} | set(ls)
    dens = {(v, k): maximal_path_density(g, v, k) for v in range(g.n) for k in budgets}
    deg = [g.degree(v) for v in range(g.n)]
    out = {"path_density": 0, "sphere": 0, "ball": 0, "sphere_skipped": 0}
    for l in ls:
        worst = max(dens[u, l] - deg[u] for u in range(g.n))
        ball_l = max(int(levels[u][: l + 1].sum()) for u in range(g.n))
        for v in range(g.n):
            delta = (dens[v, l] - deg[v]) / l
            if delta < 2:
                out["sphere_skipped"] += 1
            elif levels[v][l + 1] > deg[v] * (delta - 1) ** l:
                out["sphere"] += 1
            for j in js:
                if dens[v, j * l] > j * worst + deg[v]:
                    out["path_density"] += 1
                if int(levels[v][: j * l + 1].sum()) > ball_l ** j:
                    out["ball"] += 1
    return out
