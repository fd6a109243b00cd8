import itertools
import math

import numpy as np
import pytest

from sawspin.graph import Graph
from sawspin.model import SpinSystem
from sawspin.sawtree import NodeStatus, SawTree


def brute_log_partition(system, condition=None):
    """Direct sum over every configuration of ``exp(log_weight)``."""
    condition = condition or {}
    terms = []
    for cfg in itertools.product((1, -1), repeat=system.n):
        if all(cfg[v] == s for v, s in condition.items()):
            terms.append(system.log_weight(np.array(cfg)))
    m = max(terms)
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


def brute_marginal(system, v, condition=None):
    condition = dict(condition or {})
    lp = brute_log_partition(system, {**condition, v: 1})
    lm = brute_log_partition(system, {**condition, v: -1})
    return 1.0 / (1.0 + math.exp(lm - lp))


def random_graph(rng, n, p):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph(n, edges)


def random_system(rng, g, scale=2.0):
    return SpinSystem(g, rng.uniform(-scale, scale, (len(g.edges), 4)), rng.uniform(-scale, scale, (g.n, 2)))


def random_tree(rng, n, scale=2.0, fixed_frac=0.0):
    parent = [-1] + sorted(int(rng.integers(0, i)) for i in range(1, n))
    # make it BFS ordered: relabel by (depth, parent) order
    depth = [0] * n
    for i in range(1, n):
        depth[i] = depth[parent[i]] + 1
    order = sorted(range(n), key=lambda i: (depth[i], parent[i] if i else -1, i))
    pos = {v: k for k, v in enumerate(order)}
    par = [-1] + [pos[parent[v]] for v in order[1:]]
    status = np.zeros(n, dtype=np.int8)
    leaves = set(range(n)) - set(par)
    for i in leaves:
        if i and rng.random() < fixed_frac:
            status[i] = rng.choice([NodeStatus.PLUS, NodeStatus.MINUS])
    return SawTree.from_parents(par, rng.uniform(-scale, scale, (n, 4)), rng.uniform(-scale, scale, (n, 2)), status)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
