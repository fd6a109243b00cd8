"""Reading and writing spin systems as JSON documents.

General form::

    {"n": 3,
     "edges": [[0, 1, pp, pm, mp, mm], ...],
     "fields": [[0, h_plus, h_minus], ...],
     "vertex_order": [2, 0, 1]}          # optional

Ising shorthand (expanded with :func:`make_ising`)::

    {"n": 3, "ising": {"edges": [[0, 1, J], ...], "B": [B_0, B_1, B_2]}}

Numbers may be JSON numbers or the strings ``"inf"``/``"-inf"``/``"nan"``
so that hard constraints can be written down and then rejected by
validation with a located message.  An absent ``fields`` key means zero
fields; a present but partial list leaves the other vertices uncovered.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError
from .model import ModelError, SpinSystem, make_ising

__all__ = ["ModelFileError", "parse_model", "load_model", "dump_model", "save_model"]


class ModelFileError(ValueError):
    """The document is not a well-formed model description."""


def _num(x, where: str) -> float:
    if isinstance(x, bool):
        raise ModelFileError(f"{where}: expected a number, got {x!r}")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            pass
    raise ModelFileError(f"{where}: expected a number, got {x!r}")


def _vertex(x, n: int, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ModelFileError(f"{where}: vertex must be an integer, got {x!r}")
    if not 0 <= x < n:
        raise ModelFileError(f"{where}: vertex {x} out of range for n = {n}")
    return x


def _rows(doc, key: str, width: int) -> list:
    rows = doc.get(key, [])
    if not isinstance(rows, list):
        raise ModelFileError(f"'{key}' must be a list")
    for i, r in enumerate(rows):
        if not isinstance(r, list) or len(r) != width:
            raise ModelFileError(f"{key}[{i}]: expected {width} entries, got {r!r}")
    return rows


def parse_model(doc) -> SpinSystem:
    """Build a :class:`SpinSystem` from an already-decoded document."""
    if not isinstance(doc, dict):
        raise ModelFileError("model document must be an object")
    n = doc.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise ModelFileError(f"'n' must be a non-negative integer, got {n!r}")
    order = doc.get("vertex_order")
    try:
        if "ising" in doc:
            if "edges" in doc or "fields" in doc:
                raise ModelFileError("give either 'ising' or 'edges'/'fields', not both")
            ising = doc["ising"]
            if not isinstance(ising, dict):
                raise ModelFileError("'ising' must be an object")
            rows = _rows(ising, "edges", 3)
            pairs = [(_vertex(u, n, f"ising.edges[{i}]"), _vertex(v, n, f"ising.edges[{i}]"))
                     for i, (u, v, _) in enumerate(rows)]
            g = Graph(n, pairs, order)
            couplings = {p: _num(r[2], f"ising.edges[{i}]") for i, (p, r) in enumerate(zip(pairs, rows))}
            B = ising.get("B", [0.0] * n)
            if not isinstance(B, list) or len(B) != n:
                raise ModelFileError(f"'ising.B' must list {n} fields")
            return make_ising(g, couplings, [_num(b, f"ising.B[{i}]") for i, b in enumerate(B)])

        rows = _rows(doc, "edges", 6)
        pairs = [(_vertex(r[0], n, f"edges[{i}]"), _vertex(r[1], n, f"edges[{i}]")) for i, r in enumerate(rows)]
        g = Graph(n, pairs, order)
        pots = {p: tuple(_num(x, f"edges[{i}]") for x in r[2:]) for i, (p, r) in enumerate(zip(pairs, rows))}
        if "fields" in doc:
            h = np.full((n, 2), np.nan)
            seen = set()
            for i, r in enumerate(_rows(doc, "fields", 3)):
                v = _vertex(r[0], n, f"fields[{i}]")
                if v in seen:
                    raise ModelFileError(f"fields[{i}]: duplicate field for vertex {v}")
                seen.add(v)
                h[v] = (_num(r[1], f"fields[{i}]"), _num(r[2], f"fields[{i}]"))
        else:
            h = np.zeros((n, 2))
        return SpinSystem.from_potentials(g, pots, h)
    except GraphError as e:
        raise ModelFileError(str(e)) from e


def load_model(path) -> SpinSystem:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path}: not valid JSON ({e})") from e
    return parse_model(doc)


def _out(x: float):
    return x if math.isfinite(x) else str(x)


def dump_model(system: SpinSystem) -> dict:
    """General-form document for ``system`` (round-trips through :func:`parse_model`)."""
    g = system.graph
    doc = {
        "n": g.n,
        "edges": [[u, v, *(_out(float(x)) for x in system.beta[e])] for e, (u, v) in enumerate(g.edges)],
        "fields": [[v, _out(float(system.h[v, 0])), _out(float(system.h[v, 1]))] for v in range(g.n)],
    }
    if tuple(g.vertex_order) != tuple(range(g.n)):
        doc["vertex_order"] = list(g.vertex_order)
    return doc


def save_model(system: SpinSystem, path) -> None:
    Path(path).write_text(json.dumps(dump_model(system), indent=1) + "\n")
