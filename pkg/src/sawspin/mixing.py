"""Mixing conditions, decay bounds and checkable inequalities.

Two regimes give exponential decay of boundary influence on trees (and on
graphs through the self-avoiding-walk tree), for a sparsity parameter
``d``:

* small coupling, ``(d - 1) tanh J < 1``: log-marginals move by at most
  ``4 J deg(v) ((d - 1) tanh J) ** (t - 1)``;
* strong field, ``B_min > B(d, alpha_max, gamma)`` (or the mirrored
  negative condition): marginals move by at most
  ``deg(v) gamma / 4 * rate ** (t - 1)`` with
  ``rate = (d - 1) gamma e^x / (1 + e^x)^2``, ``x = 2 B_min - (d - 1) alpha_max``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

import numpy as np

from .marginal import log_message, node_log_ratios
from .model import MM, MP, PM, PP, SpinSystem, SystemParameters, derive_parameters
from .sawtree import NodeStatus, SawTree, build_saw_tree

__all__ = [
    "Regime",
    "DecayBound",
    "DomainError",
    "DecayRow",
    "critical_J",
    "field_threshold",
    "classify_mixing",
    "tree_log_odds_envelope",
    "empirical_decay",
    "boundary_extremes",
    "decay_csv",
    "contraction_holds",
    "contraction_check",
    "derivative_min_denominator",
    "derivative_bound_check",
    "product_mean_holds",
    "product_mean_check",
    "run_inequality_suite",
]

EXHAUSTIVE_LIMIT = 16


class DomainError(ValueError):
    """Arguments outside the domain of a closed-form threshold."""


class Regime(str, Enum):
    INVERSE_TEMPERATURE = "InverseTemperature"
    FIELD_DOMINATED = "FieldDominated"
    NONE = "None"


@dataclass(frozen=True)
class DecayBound:
    """``f(t) = coefficient * root_degree * rate ** (t - 1)``.

    ``log_form`` is true when the bound controls differences of
    log-probabilities rather than probabilities.
    """

    regime: Regime
    coefficient: float
    rate: float
    root_degree: float
    log_form: bool
    branch: str | None = None

    @property
    def prefactor(self) -> float:
        return self.coefficient * self.root_degree

    def for_root(self, degree: float) -> "DecayBound":
        return replace(self, root_degree=float(degree))

    def log_value(self, t: int) -> float:
        """``log f(t)``, ``-inf`` when the bound is exactly zero."""
        if self.regime is Regime.NONE:
            return math.inf
        if t < 1:
            raise ValueError("t must be at least 1")
        if self.prefactor <= 0:
            return -math.inf
        if t == 1:
            return math.log(self.prefactor)
        if self.rate <= 0:
            return -math.inf
        return math.log(self.prefactor) + (t - 1) * math.log(self.rate)

    def __call__(self, t: int) -> float:
        return math.exp(self.log_value(t))


def critical_J(d: float) -> float:
    """Coupling below which ``(d - 1) tanh J < 1``: ``log(d / (d - 2)) / 2``; ``inf`` for ``d <= 2``."""
    if d <= 0:
        raise DomainError("d must be positive")
    if d <= 2:
        return math.inf
    return 0.5 * math.log(d / (d - 2.0))


def field_threshold(d: float, alpha: float, gamma: float) -> float:
    """``(d - 1) alpha / 2 + log((sqrt(gamma (d - 1)) + sqrt(gamma (d - 1) - 4)) / 2)``."""
    q = gamma * (d - 1.0)
    if not q >= 4.0:
        raise DomainError(
            f"gamma * (d - 1) = {q:.6g} < 4; the field threshold is only defined in the "
            "regime (d - 1) tanh J >= 1, which forces gamma * (d - 1) >= 4"
        )
    return (d - 1.0) * alpha / 2.0 + math.log((math.sqrt(q) + math.sqrt(q - 4.0)) / 2.0)


def _field_rate(d: float, gamma: float, x) -> np.ndarray:
    # (d - 1) gamma e^x / (1 + e^x)^2 written without overflow
    return (d - 1.0) * gamma * 0.25 / np.cosh(np.asarray(x, dtype=float) / 2.0) ** 2


def classify_mixing(params: SystemParameters, d: float, root_degree: float | None = None,
                    per_vertex: bool = False) -> DecayBound:
    """Pick the applicable decay regime and its bound.

    ``root_degree`` is the degree of the vertex the bound is evaluated at;
    it defaults to ``d``.  With ``per_vertex`` the field condition is
    checked vertex by vertex (each ``B_i`` beyond either threshold), which
    is valid when ``d`` bounds the maximum degree.
    """
    deg = float(d if root_degree is None else root_degree)
    J = params.J or 0.0
    branching = max(d - 1.0, 0.0)
    rate = branching * math.tanh(J)
    if rate < 1.0:
        return DecayBound(Regime.INVERSE_TEMPERATURE, 4.0 * J, rate, deg, log_form=True)

    gamma = params.gamma
    up = field_threshold(d, params.alpha_max, gamma)
    down = field_threshold(d, -params.alpha_min, gamma)
    none = DecayBound(Regime.NONE, math.nan, math.nan, deg, log_form=False)
    if per_vertex:
        B = np.asarray(params.per_vertex_B, dtype=float)
        hi, lo = B > up, B < -down
        if B.size == 0 or not np.all(hi | lo):
            return none
        x = np.where(hi, 2 * B - (d - 1) * params.alpha_max, 2 * B - (d - 1) * params.alpha_min)
        r = float(np.max(_field_rate(d, gamma, x)))
        return DecayBound(Regime.FIELD_DOMINATED, gamma / 4.0, r, deg, log_form=False, branch="per-vertex")
    if params.B_min is not None and params.B_min > up:
        r = float(_field_rate(d, gamma, 2 * params.B_min - (d - 1) * params.alpha_max))
        return DecayBound(Regime.FIELD_DOMINATED, gamma / 4.0, r, deg, log_form=False, branch="+")
    if params.B_max is not None and params.B_max < -down:
        r = float(_field_rate(d, gamma, 2 * params.B_max - (d - 1) * params.alpha_min))
        return DecayBound(Regime.FIELD_DOMINATED, gamma / 4.0, r, deg, log_form=False, branch="-")
    return none


def tree_log_odds_envelope(J: float, s: int, t: int) -> float:
    """``4 J s tanh(J) ** (t - 1)``: bound on the root log-odds shift on a tree."""
    if s == 0 or J == 0:
        return 0.0
    return 4.0 * J * s * math.tanh(J) ** (t - 1)


# ---------------------------------------------------------------------------
# empirical decay


def _boundary_nodes(tree: SawTree, t: int) -> np.ndarray:
    st = tree.status
    fixed = (st == NodeStatus.PLUS) | (st == NodeStatus.MINUS)
    return np.flatnonzero((tree.depth == t) & ~fixed)


def _batched_root(tree: SawTree, t: int, nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Root log-odds for each row of ``values`` (probabilities) placed on ``nodes``."""
    base = node_log_ratios(tree, t, init=0.5)
    levels = tree.level_slices()
    B = values.shape[0]
    L = np.repeat(base[: levels[t].stop, None], B, axis=1)
    with np.errstate(divide="ignore"):
        L[nodes] = (np.log(values) - np.log1p(-values)).T
    for k in range(t, 0, -1):
        sl = levels[k]
        par = tree.parent[sl]
        beta = tree.beta[sl]
        msg = log_message(beta, L[sl])
        p0 = levels[k - 1].start
        acc = np.zeros((levels[k - 1].stop - p0, B))
        np.add.at(acc, par - p0, msg)
        # parents keep their own field and fixed status
        own = tree.h[levels[k - 1], 0] - tree.h[levels[k - 1], 1]
        st = tree.status[levels[k - 1]]
        own = np.where(st == NodeStatus.PLUS, np.inf, np.where(st == NodeStatus.MINUS, -np.inf, own))
        L[levels[k - 1]] = own[:, None] + acc
    return L[0]


def boundary_extremes(tree: SawTree, t: int, strategy: str = "extremal"):
    """Smallest and largest root log-odds over boundary assignments at depth ``t``.

    ``extremal`` compares the all-``+`` and all-``-`` boundaries;
    ``exhaustive`` enumerates every assignment (at most
    ``2 ** EXHAUSTIVE_LIMIT``); ``signed`` uses the per-node direction of
    influence along its root path, which attains the true extremes because
    the root odds are monotone in each boundary value.
    """
    nodes = _boundary_nodes(tree, t)
    if nodes.size == 0:
        L = node_log_ratios(tree, t)[0]
        return L, L, 0
    if strategy == "extremal":
        lp = node_log_ratios(tree, t, overrides={int(i): 1.0 for i in nodes})[0]
        lm = node_log_ratios(tree, t, overrides={int(i): 0.0 for i in nodes})[0]
        return min(lp, lm), max(lp, lm), nodes.size
    if strategy == "signed":
        sign = np.ones(tree.size)
        det = (tree.beta[:, PP] + tree.beta[:, MM]) - (tree.beta[:, PM] + tree.beta[:, MP])
        for i in range(1, int(nodes.max()) + 1):
            sign[i] = sign[tree.parent[i]] * (1.0 if det[i] >= 0 else -1.0)
        up = {int(i): (1.0 if sign[i] > 0 else 0.0) for i in nodes}
        lp = node_log_ratios(tree, t, overrides=up)[0]
        lm = node_log_ratios(tree, t, overrides={i: 1.0 - x for i, x in up.items()})[0]
        return min(lp, lm), max(lp, lm), nodes.size
    if strategy == "exhaustive":
        m = nodes.size
        if m > EXHAUSTIVE_LIMIT:
            raise ValueError(f"{m} boundary nodes exceed the exhaustive limit {EXHAUSTIVE_LIMIT}")
        lo, hi = math.inf, -math.inf
        total = 2 ** m
        chunk = 1024
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk))[:, None]
            vals = ((idx >> np.arange(m)) & 1).astype(float)
            L = _batched_root(tree, t, nodes, vals)
            lo, hi = min(lo, float(L.min())), max(hi, float(L.max()))
        return lo, hi, m
    raise ValueError(f"unknown boundary strategy {strategy!r}")


@dataclass(frozen=True)
class DecayRow:
    t: int
    observed: float
    bound: float
    regime: str
    observed_prob: float
    observed_log: float
    observed_log_ratio: float
    sphere_size: int


def _log_p(L: float) -> float:
    return -float(np.logaddexp(0.0, -L))


def empirical_decay(system: SpinSystem, v: int, t_values: Iterable[int], d: float | None = None,
                    strategy: str = "extremal", boundary=None, per_vertex: bool = False) -> list[DecayRow]:
    """Measure how far the root marginal of ``T_saw(v)`` moves when the depth-``t`` sphere changes.

    For each ``t`` the tree is built to depth ``t``, every non-fixed node at
    depth ``t`` is assigned a boundary spin, and the spread of the root
    marginal over the chosen boundary pairs is compared with the regime's
    decay bound (``d`` defaults to the maximum degree).
    """
    params = derive_parameters(system)
    if d is None:
        d = max(system.graph.max_degree(), 1)
    bound = classify_mixing(params, d, root_degree=system.graph.degree(v), per_vertex=per_vertex)
    rows = []
    for t in t_values:
        t = int(t)
        tree = build_saw_tree(system, v, boundary, depth_limit=t)
        lo, hi, _ = boundary_extremes(tree, t, strategy)
        d_prob = float(1.0 / (1.0 + np.exp(-hi)) - 1.0 / (1.0 + np.exp(-lo)))
        if hi == lo:
            d_log = d_lr = 0.0
        else:
            d_log = _log_p(hi) - _log_p(lo)
            d_lr = hi - lo
        b = bound(t) if bound.regime is not Regime.NONE else math.inf
        rows.append(DecayRow(
            t=t,
            observed=d_log if bound.log_form else d_prob,
            bound=b,
            regime=bound.regime.value,
            observed_prob=d_prob,
            observed_log=d_log,
            observed_log_ratio=d_lr,
            sphere_size=tree.sphere_size(t),
        ))
    return rows


def decay_csv(rows: Iterable[DecayRow], rounded: bool = False) -> str:
    """CSV with columns ``t, observed, bound, regime`` (full precision).

    ``rounded`` appends 4-significant-digit copies of ``observed`` and ``bound``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "observed", "bound", "regime"] + (["observed_rounded", "bound_rounded"] if rounded else []))
    for r in rows:
        row = [r.t, repr(float(r.observed)), repr(float(r.bound)), r.regime]
        if rounded:
            row += [f"{r.observed:.4g}", f"{r.bound:.4g}"]
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# inequality oracles

_REL_TOL = 1e-12


def _positive(*arrays):
    for a in arrays:
        if np.any(~(np.asarray(a) > 0)):
            raise ValueError("all arguments must be strictly positive")


def contraction_check(a, b, c, d, x, y, rel_tol: float = _REL_TOL) -> np.ndarray:
    """Vectorised ``max(g(x)/g(y), g(y)/g(x)) <= max(x/y, y/x) ** t`` for ``g = (a x + b)/(c x + d)``.

    ``t = |sqrt(ad) - sqrt(bc)| / (sqrt(ad) + sqrt(bc))``.  Compared in log
    space with relative slack ``rel_tol``.
    """
    a, b, c, d, x, y = (np.asarray(v, dtype=float) for v in (a, b, c, d, x, y))
    _positive(a, b, c, d, x, y)
    sad, sbc = np.sqrt(a * d), np.sqrt(b * c)
    t = np.abs(sad - sbc) / (sad + sbc)
    lg = lambda z: np.log(a * z + b) - np.log(c * z + d)  # noqa: E731
    lhs = np.abs(lg(x) - lg(y))
    rhs = t * np.abs(np.log(x) - np.log(y))
    return lhs <= rhs + np.log1p(rel_tol)


def contraction_holds(a, b, c, d, x, y) -> bool:
    return bool(np.all(contraction_check(a, b, c, d, x, y)))


def derivative_min_denominator(beta) -> tuple[np.ndarray, np.ndarray]:
    """Minimum over ``[0, 1]`` of ``w(x) = (M x + d)(N x + b)``, and the case label.

    Cases: 0 when ``M N = 0`` (``w`` linear), 1 when ``M N < 0`` (concave,
    minimum at an endpoint), 2 when ``M, N > 0`` and 3 when ``M, N < 0``
    (convex; the vertex is checked and the minimum taken over endpoints and
    the vertex if it falls inside).
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    a, b, c, d = (np.exp(beta[:, k]) for k in (PP, PM, MP, MM))
    M, N = c - d, a - b
    w0, w1 = d * b, c * a
    wmin = np.minimum(w0, w1)
    MN = M * N
    case = np.where(MN == 0, 0, np.where(MN < 0, 1, np.where(M > 0, 2, 3)))
    with np.errstate(divide="ignore", invalid="ignore"):
        xl = -(d * N + b * M) / (2 * M * N)
    inside = (MN > 0) & (xl > 0) & (xl < 1)
    wl = (M * xl + d) * (N * xl + b)
    wmin = np.where(inside, np.minimum(wmin, wl), wmin)
    return wmin, case


def derivative_bound_check(beta, grid: int = 1000, rel_tol: float = _REL_TOL) -> np.ndarray:
    """``max_{x in [0,1]} |h(x)| <= gamma`` per edge, on a grid plus the analytic minimum of the denominator."""
    from .marginal import recursion_h
    from .model import _gamma_from_beta

    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    gamma = _gamma_from_beta(beta)
    xs = np.linspace(0.0, 1.0, grid)
    hx = np.abs(recursion_h(beta[:, None, :], xs[None, :]))
    grid_max = hx.max(axis=1)
    a, b, c, d = (np.exp(beta[:, k]) for k in (PP, PM, MP, MM))
    wmin, _ = derivative_min_denominator(beta)
    analytic = np.abs(a * d - b * c) / wmin
    lim = gamma * (1 + rel_tol)
    return (grid_max <= lim) & (analytic <= lim)


def product_mean_check(lambdas, rel_tol: float = _REL_TOL) -> np.ndarray:
    """``prod (1 + l_i) >= (1 + geomean(l)) ** n`` per row of ``lambdas``."""
    lam = np.atleast_2d(np.asarray(lambdas, dtype=float))
    _positive(lam)
    n = lam.shape[1]
    lhs = np.sum(np.log1p(lam), axis=1)
    rhs = n * np.log1p(np.exp(np.mean(np.log(lam), axis=1)))
    return lhs >= rhs - np.log1p(rel_tol)


def product_mean_holds(lambdas) -> bool:
    return bool(np.all(product_mean_check(np.asarray(lambdas, dtype=float)[None, :])))


def run_inequality_suite(samples: int = 10_000, seed: int = 0, grid: int = 1000) -> dict[str, int]:
    """Random property checks; returns the number of violations per inequality."""
    rng = np.random.default_rng(seed)
    abcd = np.exp(rng.uniform(-4, 4, size=(samples, 4)))
    xy = np.exp(rng.uniform(-6, 6, size=(samples, 2)))
    v_con = ~contraction_check(*abcd.T, *xy.T)
    beta = rng.uniform(-3, 3, size=(samples, 4))
    v_der = np.zeros(samples, dtype=bool)
    for s in range(0, samples, 500):
        v_der[s:s + 500] = ~derivative_bound_check(beta[s:s + 500], grid)
    sizes = rng.integers(1, 9, size=samples)
    v_prod = 0
    for k in range(1, 9):
        rows = sizes == k
        if np.any(rows):
            lam = np.exp(rng.uniform(-5, 5, size=(int(rows.sum()), k)))
            v_prod += int(np.count_nonzero(~product_mean_check(lam)))
    return {"contraction": int(v_con.sum()), "derivative_bound": int(v_der.sum()), "product_mean": v_prod}
