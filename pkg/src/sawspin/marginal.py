"""Root marginals of tree-structured spin systems.

The root's odds ``R = P(+)/P(-)`` satisfy, over the children ``c`` of a node,

    R = exp(2 B) * prod_c (a_c R_c + b_c) / (c_c R_c + d_c)

with ``a..d`` the exponentiated potentials of the edge to ``c``.  Everything
is evaluated on ``L = log R``; a child fixed to ``+`` has ``L = +inf`` and
contributes ``beta(+,+) - beta(-,+)``, a child fixed to ``-`` contributes
``beta(+,-) - beta(-,-)``.  Levels are processed bottom-up over the
breadth-first layout of :class:`~sawspin.sawtree.SawTree`, so there is no
call-stack recursion.

The same quantity written on probabilities ``x`` of the children is
``p = g(x) = 1 / (1 + lam * prod_c f_c(x_c))`` with
``f(x) = (M x + d) / (N x + b)``, ``M = c - d``, ``N = a - b``; the
functions here evaluate ``f``, its log-derivative factor ``h`` and ``g``
for the analysis code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, logit

from .model import MM, MP, PM, PP, SystemParameters
from .sawtree import NodeStatus, SawTree

__all__ = [
    "MarginalResult",
    "exact_root_marginal",
    "truncated_root_marginal",
    "node_log_ratios",
    "subtree_log_partition",
    "collapse_subtree",
    "marginal_difference_bound",
    "recursion_f",
    "recursion_h",
    "recursion_g",
    "log_message",
]


@dataclass(frozen=True)
class MarginalResult:
    """``P(root = +)`` with its log-odds; ``depth_used`` is ``None`` for exact values."""

    p_plus: float
    log_ratio: float
    depth_used: int | None = None
    error_bound: float | None = None

    @classmethod
    def from_log_ratio(cls, L: float, depth_used=None, error_bound=None) -> "MarginalResult":
        return cls(float(expit(L)), float(L), depth_used, error_bound)

    @property
    def log_p_plus(self) -> float:
        """``log P(+)`` computed from the log-odds without cancellation."""
        return -float(np.logaddexp(0.0, -self.log_ratio))

    @property
    def log_p_minus(self) -> float:
        return -float(np.logaddexp(0.0, self.log_ratio))

    def with_bound(self, bound: float) -> "MarginalResult":
        return replace(self, error_bound=bound)


def log_message(beta: np.ndarray, L: np.ndarray) -> np.ndarray:
    """``log((a e^L + b) / (c e^L + d))`` for rows ``beta = (pp, pm, mp, mm)``."""
    beta = np.atleast_2d(beta)
    L = np.asarray(L, dtype=float)
    # extra trailing axes of L are batch dimensions
    pp, pm, mp, mm = (beta[:, k].reshape((-1,) + (1,) * (L.ndim - 1)) for k in (PP, PM, MP, MM))
    with np.errstate(invalid="ignore"):
        out = np.logaddexp(pp + L, pm) - np.logaddexp(mp + L, mm)
    plus = np.isposinf(L)
    if np.any(plus):
        out = np.where(plus, pp - mp, out)
    return out


def _init_log_ratio(init) -> float:
    if isinstance(init, str):
        init = {"half": 0.5, "zero": 0.0, "one": 1.0}[init]
    x = float(init)
    if x < 0:
        raise ValueError("initial values must be non-negative")
    # values above 1 are read as odds-equivalent probabilities clipped to 1
    return float(logit(min(x, 1.0)))


def node_log_ratios(tree: SawTree, t: int | None = None, init=0.5, overrides=None) -> np.ndarray:
    """Log-odds of every node (of its own subtree) after bottom-up evaluation.

    With truncation depth ``t``, nodes at depth ``t`` that have children, and
    every ``TRUNCATED`` node, take the initial value ``init`` (a probability
    in ``[0, 1]``, or a per-node array of them).  ``overrides`` maps node
    indices to probabilities that replace the computed value; their
    subtrees are ignored.  Entries below the truncation depth are NaN.
    """
    n = tree.size
    status = tree.status
    L = tree.h[:, 0] - tree.h[:, 1]
    L = L.astype(float, copy=True)
    L[status == NodeStatus.PLUS] = np.inf
    L[status == NodeStatus.MINUS] = -np.inf
    levels = tree.level_slices()
    last = len(levels) - 1 if t is None else min(t, len(levels) - 1)

    pinned = np.zeros(n, dtype=bool)
    if np.ndim(init) == 0:
        init_L = np.full(n, _init_log_ratio(init))
    else:
        init_L = np.array([_init_log_ratio(x) for x in np.asarray(init, dtype=float)])
    trunc = status == NodeStatus.TRUNCATED
    if t is not None:
        trunc = trunc | ((tree.depth == t) & (tree.child_count > 0))
    trunc &= tree.depth <= last
    if np.any(trunc) and t is None:
        raise ValueError("tree has truncated nodes; give a truncation depth and initial value")
    L[trunc] = init_L[trunc]
    pinned |= trunc
    if overrides:
        for i, x in overrides.items():
            L[i] = _init_log_ratio(x)
            pinned[i] = True

    if last + 1 < len(levels):
        L[levels[last + 1].start:] = np.nan
    for k in range(last, 0, -1):
        sl = levels[k]
        par = tree.parent[sl]
        msg = log_message(tree.beta[sl], L[sl])
        # pinned parents ignore their children
        msg = np.where(pinned[par], 0.0, msg)
        p0 = levels[k - 1].start
        L[levels[k - 1]] += np.bincount(par - p0, weights=msg, minlength=levels[k - 1].stop - p0)
    return L


def exact_root_marginal(tree: SawTree) -> MarginalResult:
    """Exact ``P(root = +)`` on a fully built tree."""
    return MarginalResult.from_log_ratio(node_log_ratios(tree)[0])


def truncated_root_marginal(tree: SawTree, t: int, init=0.5) -> MarginalResult:
    """Root marginal with the recursion started at depth ``t`` from ``init``.

    ``init`` may be ``0``, ``0.5``, ``1``, any value in ``[0, 1]`` or a
    per-node array; it is the stand-in probability for every node at depth
    ``t`` whose subtree is cut off.  For ``t`` at least the tree height the
    result is the exact marginal.
    """
    if t < 1:
        raise ValueError("truncation depth must be at least 1")
    return MarginalResult.from_log_ratio(node_log_ratios(tree, t, init)[0], depth_used=int(t))


def subtree_log_partition(tree: SawTree) -> np.ndarray:
    """``(size, 2)`` array of ``log Z(T_i, X_i = +)`` and ``log Z(T_i, X_i = -)``.

    ``Z(T_i, X_i = s)`` sums the weights of the subtree below ``i`` (edge
    potentials inside it plus all fields, including ``h_i(s)``) with ``i``
    held at ``s``.  Fixed nodes give ``-inf`` for the forbidden spin.
    """
    if np.any(tree.status == NodeStatus.TRUNCATED):
        raise ValueError("subtree partition functions need a fully built tree")
    lz = tree.h.astype(float, copy=True)
    lz[tree.status == NodeStatus.PLUS, 1] = -np.inf
    lz[tree.status == NodeStatus.MINUS, 0] = -np.inf
    levels = tree.level_slices()
    for k in range(len(levels) - 1, 0, -1):
        sl = levels[k]
        b = tree.beta[sl]
        zp, zm = lz[sl, 0], lz[sl, 1]
        to_plus = np.logaddexp(b[:, PP] + zp, b[:, PM] + zm)
        to_minus = np.logaddexp(b[:, MP] + zp, b[:, MM] + zm)
        par = tree.parent[sl]
        p0 = levels[k - 1].start
        m = levels[k - 1].stop - p0
        lz[levels[k - 1], 0] += np.bincount(par - p0, weights=to_plus, minlength=m)
        lz[levels[k - 1], 1] += np.bincount(par - p0, weights=to_minus, minlength=m)
    return lz


def collapse_subtree(tree: SawTree, edge) -> SawTree:
    """Remove the subtree below ``l`` for tree edge ``(k, l)`` and fold it into ``k``'s field.

    The new field is ``h'_k(s) = h_k(s) + log sum_{s_l} exp(beta_kl(s, s_l)) Z(T_l, s_l)``,
    which leaves the root marginal unchanged.
    """
    k, l = (int(x) for x in edge)
    if l <= 0 or l >= tree.size or tree.parent[l] != k:
        raise ValueError(f"({k}, {l}) is not a parent-child edge of the tree")
    keep = ~tree.subtree_mask(l)
    sub = tree.subtree(l)
    lz = subtree_log_partition(sub)[0]
    b = tree.beta[l]
    h = tree.h.astype(float, copy=True)
    h[k, 0] += np.logaddexp(b[PP] + lz[0], b[PM] + lz[1])
    h[k, 1] += np.logaddexp(b[MP] + lz[0], b[MM] + lz[1])
    return tree.select(keep, h=h)


def _sup_g_one_minus_g(log_lo: np.ndarray, log_hi: np.ndarray) -> np.ndarray:
    # r / (1 + r)^2 = 1 / (4 cosh^2(log r / 2)), maximised at the point of [lo, hi] nearest 0
    x = np.where(log_lo > 0, log_lo, np.where(log_hi < 0, log_hi, 0.0))
    return 0.25 / np.cosh(x / 2.0) ** 2


def marginal_difference_bound(tree: SawTree, t: int, params: SystemParameters) -> float:
    """Bound on ``|P(+ | zeta) - P(+ | eta)|`` for boundaries differing only at depth ``>= t``.

    Sums ``gamma^t * prod_i sup g_i (1 - g_i)`` over the root paths to the
    depth-``t`` nodes, where the supremum for node ``i`` is over
    ``lam_i * prod_j f_j`` with each ``f_j`` in ``[e^alpha_min, e^alpha_max]``.
    With no field information this is ``gamma^t * |S_t| / 4^t``.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    s_mask = tree.depth == t
    if not np.any(s_mask) or not params.gamma:
        return 0.0
    log_lam = -(tree.h[:, 0] - tree.h[:, 1])
    k = tree.child_count.astype(float)
    lo = log_lam + k * params.alpha_min
    hi = log_lam + k * params.alpha_max
    u = _sup_g_one_minus_g(lo, hi)
    prod = np.ones(tree.size)
    for i in range(1, int(np.argmax(s_mask)) + int(np.count_nonzero(s_mask))):
        prod[i] = prod[tree.parent[i]] * u[tree.parent[i]]
    total = float(np.sum(prod[s_mask]))
    return math.exp(t * math.log(params.gamma)) * total


# ---------------------------------------------------------------------------
# recursion functions on probabilities


def _abcd(beta):
    beta = np.asarray(beta, dtype=float)
    return beta[..., PP], beta[..., PM], beta[..., MP], beta[..., MM]


def recursion_f(beta, x):
    """``f(x) = (M x + d) / (N x + b)`` for an edge, evaluated in log space."""
    pp, pm, mp, mm = _abcd(beta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        lx, l1x = np.log(x), np.log1p(-x)
    return np.exp(np.logaddexp(mp + lx, mm + l1x) - np.logaddexp(pp + lx, pm + l1x))


def recursion_h(beta, x):
    """``h(x) = (a d - b c) / ((M x + d)(N x + b))``, the derivative of ``-log f``."""
    pp, pm, mp, mm = _abcd(beta)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        lx, l1x = np.log(x), np.log1p(-x)
    s1, s2 = pp + mm, pm + mp
    hi = np.maximum(s1, s2)
    diff = np.abs(s1 - s2)
    with np.errstate(divide="ignore"):
        log_det = hi + np.log(-np.expm1(-diff))
    log_den = np.logaddexp(mp + lx, mm + l1x) + np.logaddexp(pp + lx, pm + l1x)
    return np.sign(s1 - s2) * np.exp(log_det - log_den)


def recursion_g(lam, betas, xs):
    """``g(x) = 1 / (1 + lam * prod_j f_j(x_j))`` for a node with the given child edges."""
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    log_prod = np.sum(np.log(recursion_f(betas, xs)), axis=-1)
    return expit(-(np.log(lam) + log_prod))
