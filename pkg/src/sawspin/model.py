"""Two-state spin systems without hard constraints.

A configuration assigns ``+1``/``-1`` to every vertex and has weight
``exp(sum_edges beta_uv(s_u, s_v) + sum_vertices h_v(s_v))``.  All
potentials are kept as finite log-weights; the exponentials ``a, b, c, d``
of an edge are only formed inside ratios whose magnitude is controlled.

Edge potentials are stored once per undirected edge, oriented from the
smaller endpoint to the larger.  Reading the edge in the other direction
swaps the two off-diagonal entries, which is the convention
``beta_uv(x, y) == beta_vu(y, x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .graph import Graph

__all__ = [
    "Spin",
    "EdgePotential",
    "VertexField",
    "SpinSystem",
    "SystemParameters",
    "ValidationReport",
    "ModelError",
    "validate_system",
    "make_ising",
    "derive_parameters",
    "edge_couplings",
    "edge_gammas",
    "external_fields",
]

# column layout of the (E, 4) potential array
PP, PM, MP, MM = 0, 1, 2, 3


class ModelError(ValueError):
    """The system is outside the supported model class or is malformed."""


class Spin(IntEnum):
    PLUS = 1
    MINUS = -1

    def __neg__(self):
        return Spin(-int(self))

    @classmethod
    def parse(cls, value) -> "Spin":
        if isinstance(value, Spin):
            return value
        if value in ("+", "+1", 1, "plus", True):
            return cls.PLUS
        if value in ("-", "-1", -1, "minus", False):
            return cls.MINUS
        raise ModelError(f"cannot read {value!r} as a spin")

    def __str__(self):
        return "+" if self is Spin.PLUS else "-"


@dataclass(frozen=True)
class EdgePotential:
    """Log-weights ``beta(+,+), beta(+,-), beta(-,+), beta(-,-)`` of one oriented edge."""

    beta_pp: float
    beta_pm: float
    beta_mp: float
    beta_mm: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.beta_pp, self.beta_pm, self.beta_mp, self.beta_mm)

    def transposed(self) -> "EdgePotential":
        return EdgePotential(self.beta_pp, self.beta_mp, self.beta_pm, self.beta_mm)

    def __call__(self, s, t) -> float:
        s, t = int(s), int(t)
        if s > 0:
            return self.beta_pp if t > 0 else self.beta_pm
        return self.beta_mp if t > 0 else self.beta_mm

    @property
    def coupling(self) -> float:
        """``(beta(+,+) + beta(-,-) - beta(-,+) - beta(+,-)) / 4``."""
        return (self.beta_pp + self.beta_mm - self.beta_mp - self.beta_pm) / 4.0

    @property
    def abcd(self) -> tuple[float, float, float, float]:
        return tuple(math.exp(x) for x in self.as_tuple())

    @property
    def gamma(self) -> float:
        """Oriented ``gamma`` of this record (see :func:`edge_gammas` for the undirected value)."""
        return float(_gamma_from_beta(np.array([self.as_tuple()]))[0])

    def is_finite(self) -> bool:
        return all(math.isfinite(x) for x in self.as_tuple())


@dataclass(frozen=True)
class VertexField:
    """Log-weights ``h(+)`` and ``h(-)`` of one vertex."""

    h_plus: float
    h_minus: float

    def __call__(self, s) -> float:
        return self.h_plus if int(s) > 0 else self.h_minus

    @property
    def external_field(self) -> float:
        return (self.h_plus - self.h_minus) / 2.0

    @property
    def lam(self) -> float:
        return math.exp(-2.0 * self.external_field)

    def is_finite(self) -> bool:
        return math.isfinite(self.h_plus) and math.isfinite(self.h_minus)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[tuple[str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return "; ".join(f"{msg} at {loc}" for loc, msg in self.violations)


class SpinSystem:
    """Graph with one edge potential per edge and one field per vertex.

    ``beta`` is an ``(E, 4)`` array aligned with ``graph.edges`` (each row
    oriented from the smaller endpoint), ``h`` an ``(n, 2)`` array of
    ``(h(+), h(-))``.  Missing entries are stored as NaN and reported by
    :func:`validate_system`.
    """

    __slots__ = ("graph", "beta", "h")

    def __init__(self, graph: Graph, beta, h):
        beta = np.array(beta, dtype=float).reshape(len(graph.edges), 4)
        h = np.array(h, dtype=float).reshape(graph.n, 2)
        beta.setflags(write=False)
        h.setflags(write=False)
        self.graph = graph
        self.beta = beta
        self.h = h

    @classmethod
    def from_potentials(cls, graph: Graph,
                        edge_potentials: Mapping[tuple[int, int], EdgePotential | Sequence[float]],
                        vertex_fields: Mapping[int, VertexField | Sequence[float]] | Sequence | None = None):
        """Build from per-edge and per-vertex records.

        Edge keys may be given in either orientation; a key ``(v, u)`` with
        ``v > u`` is transposed into storage orientation.
        """
        beta = np.full((len(graph.edges), 4), np.nan)
        for (u, v), pot in edge_potentials.items():
            if not isinstance(pot, EdgePotential):
                pot = EdgePotential(*pot)
            try:
                k = graph.edge_index(u, v)
            except KeyError:
                raise ModelError(f"potential given for non-edge ({u}, {v})") from None
            if u > v:
                pot = pot.transposed()
            beta[k] = pot.as_tuple()
        h = np.full((graph.n, 2), np.nan)
        if vertex_fields is None:
            h[:] = 0.0
        else:
            items = vertex_fields.items() if isinstance(vertex_fields, Mapping) else enumerate(vertex_fields)
            for v, f in items:
                if not isinstance(f, VertexField):
                    f = VertexField(*f)
                if not 0 <= v < graph.n:
                    raise ModelError(f"field given for unknown vertex {v}")
                h[v] = (f.h_plus, f.h_minus)
        return cls(graph, beta, h)

    @property
    def n(self) -> int:
        return self.graph.n

    def edge_potential(self, u: int, v: int) -> EdgePotential:
        """Potential of edge ``{u, v}`` read in the direction ``u -> v``."""
        row = self.beta[self.graph.edge_index(u, v)]
        pot = EdgePotential(*map(float, row))
        return pot if u < v else pot.transposed()

    def oriented_beta(self, u: int, v: int) -> np.ndarray:
        """The ``(pp, pm, mp, mm)`` row of edge ``{u, v}`` read from ``u``."""
        row = self.beta[self.graph.edge_index(u, v)]
        if u < v:
            return row
        return row[[PP, MP, PM, MM]]

    def vertex_field(self, v: int) -> VertexField:
        return VertexField(float(self.h[v, 0]), float(self.h[v, 1]))

    @property
    def edge_potentials(self) -> tuple[EdgePotential, ...]:
        return tuple(EdgePotential(*map(float, r)) for r in self.beta)

    @property
    def vertex_fields(self) -> tuple[VertexField, ...]:
        return tuple(VertexField(float(a), float(b)) for a, b in self.h)

    def log_weight(self, config) -> float:
        """Log-weight of a full ``+1/-1`` configuration."""
        s = np.asarray(config)
        total = 0.0
        for k, (u, v) in enumerate(self.graph.edges):
            total += EdgePotential(*self.beta[k])(s[u], s[v])
        for v in range(self.n):
            total += self.h[v, 0] if s[v] > 0 else self.h[v, 1]
        return float(total)

    def relabel(self, perm: Sequence[int]) -> "SpinSystem":
        """Same system with vertex ``v`` renamed ``perm[v]``."""
        g2 = self.graph.relabel(perm)
        pots = {(perm[u], perm[v]): EdgePotential(*self.beta[k]) for k, (u, v) in enumerate(self.graph.edges)}
        h2 = np.empty_like(self.h)
        for v in range(self.n):
            h2[perm[v]] = self.h[v]
        return SpinSystem.from_potentials(g2, pots, h2)

    def require_valid(self) -> None:
        report = validate_system(self)
        if not report.ok:
            raise ModelError(str(report))

    def __repr__(self):
        return f"SpinSystem(n={self.n}, edges={len(self.graph.edges)})"


def validate_system(system: SpinSystem) -> ValidationReport:
    """Check that every potential and field is present and finite."""
    out = []
    for k, (u, v) in enumerate(system.graph.edges):
        row = system.beta[k]
        if np.isnan(row).all():
            out.append((f"edge ({u},{v})", "missing potential"))
        elif np.isnan(row).any():
            out.append((f"edge ({u},{v})", "incomplete potential"))
        elif not np.isfinite(row).all():
            out.append((f"edge ({u},{v})", "hard constraint"))
    for v in range(system.n):
        row = system.h[v]
        if np.isnan(row).any():
            out.append((f"vertex {v}", "missing field"))
        elif not np.isfinite(row).all():
            out.append((f"vertex {v}", "hard constraint"))
    return ValidationReport(tuple(out))


def make_ising(graph: Graph, couplings, fields=None) -> SpinSystem:
    """Ising system ``beta_uv(s, t) = J_uv s t`` and ``h_v(s) = B_v s``.

    ``couplings`` is a scalar, a sequence aligned with ``graph.edges`` or a
    mapping ``{(u, v): J}``; ``fields`` is a scalar or per-vertex sequence.
    """
    E = len(graph.edges)
    if isinstance(couplings, Mapping):
        J = np.full(E, np.nan)
        for (u, v), val in couplings.items():
            J[graph.edge_index(u, v)] = val
    else:
        J = np.broadcast_to(np.asarray(couplings, dtype=float), (E,)).copy()
    B = np.broadcast_to(np.asarray(0.0 if fields is None else fields, dtype=float), (graph.n,))
    beta = np.stack([J, -J, -J, J], axis=1) if E else np.zeros((0, 4))
    h = np.stack([B, -B], axis=1) if graph.n else np.zeros((0, 2))
    return SpinSystem(graph, beta, h)


# ---------------------------------------------------------------------------
# derived scalars


@dataclass(frozen=True)
class SystemParameters:
    """Aggregate parameters; fields over an empty set are ``None``."""

    J: float | None
    B_min: float | None
    B_max: float | None
    alpha_min: float | None
    alpha_max: float | None
    gamma: float | None
    per_edge_J: np.ndarray = field(default=None, repr=False, compare=False)
    per_vertex_B: np.ndarray = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("J", "B_min", "B_max", "alpha_min", "alpha_max", "gamma")}


def edge_couplings(system: SpinSystem) -> np.ndarray:
    b = system.beta
    return (b[:, PP] + b[:, MM] - b[:, MP] - b[:, PM]) / 4.0


def external_fields(system: SpinSystem) -> np.ndarray:
    return (system.h[:, 0] - system.h[:, 1]) / 2.0


def _gamma_from_beta(beta: np.ndarray) -> np.ndarray:
    """Oriented ``gamma``: ``max(|bc - ad| / (ac), |bc - ad| / (bd))`` per row."""
    # |bc - ad| / (ac) = |b/a - d/c|,  |bc - ad| / (bd) = |c/d - a/b|;
    # |e^x - e^y| = e^y |expm1(x - y)| keeps precision for weak couplings
    x1, y1 = beta[:, PM] - beta[:, PP], beta[:, MM] - beta[:, MP]
    x2, y2 = beta[:, MP] - beta[:, MM], beta[:, PP] - beta[:, PM]
    g1 = np.exp(y1) * np.abs(np.expm1(x1 - y1))
    g2 = np.exp(y2) * np.abs(np.expm1(x2 - y2))
    return np.maximum(g1, g2)


def _transposed(beta: np.ndarray) -> np.ndarray:
    return beta[:, [PP, MP, PM, MM]]


def edge_gammas(system: SpinSystem) -> np.ndarray:
    """Per-edge ``gamma``, maximised over both orientations of the edge.

    The tree recursion sends messages across an edge in either direction,
    so both orientations must be covered.
    """
    return np.maximum(_gamma_from_beta(system.beta), _gamma_from_beta(_transposed(system.beta)))


def edge_alphas(system: SpinSystem) -> np.ndarray:
    """``(E, 4)``: ``beta(-,-) - beta(+,-)`` and ``beta(-,+) - beta(+,+)`` for both orientations."""
    b = system.beta
    return np.stack([b[:, MM] - b[:, PM], b[:, MP] - b[:, PP],
                     b[:, MM] - b[:, MP], b[:, PM] - b[:, PP]], axis=1)


def derive_parameters(system: SpinSystem) -> SystemParameters:
    """Coupling, field, alpha and gamma extremes of a valid system."""
    system.require_valid()
    J_e = edge_couplings(system)
    B_v = external_fields(system)
    if J_e.size:
        alphas = edge_alphas(system)
        J = float(np.max(np.abs(J_e)))
        a_min, a_max = float(alphas.min()), float(alphas.max())
        gamma = float(edge_gammas(system).max())
    else:
        J = a_min = a_max = gamma = None
    if B_v.size:
        b_min, b_max = float(B_v.min()), float(B_v.max())
    else:
        b_min = b_max = None
    return SystemParameters(J, b_min, b_max, a_min, a_max, gamma, per_edge_J=J_e, per_vertex_B=B_v)
