"""A graph marginal computed exactly on a tree.

Take a small graph with cycles and random potentials, pin a couple of
spins, then compare each free vertex's marginal from brute-force
enumeration with the root marginal of its self-avoiding-walk tree.
"""
import numpy as np

from sawspin import SpinSystem, Graph, build_saw_tree, exact_root_marginal, to_outline, tree_stats
from sawspin.oracle import exact_marginals

rng = np.random.default_rng(7)

# A 6-cycle with two chords: three overlapping cycles.
g = Graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (1, 4)])
system = SpinSystem(g, rng.uniform(-1.5, 1.5, (len(g.edges), 4)), rng.uniform(-1, 1, (6, 2)))
pinned = {2: +1, 5: -1}

truth = exact_marginals(system, pinned)
print("vertex  P(+) enumeration   P(+) tree root     tree nodes")
for v in range(g.n):
    if v in pinned:
        continue
    tree = build_saw_tree(system, v, pinned)
    p = exact_root_marginal(tree).p_plus
    print(f"{v:>6}  {truth[v]:.15f}  {p:.15f}  {tree.size:>6}")

# Closing a cycle creates a leaf whose spin is fixed by comparing the
# closing edge with the edge that leaves the vertex first.  Outline of
# the tree for vertex 0 (fixed leaves are marked with their spin):
print()
t0 = build_saw_tree(system, 0, pinned)
print(to_outline(t0))
print(tree_stats(t0))
