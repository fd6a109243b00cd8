"""Command-line interface: ``sawspin <command> [flags]``.

Reports are JSON on stdout with sorted keys, full-precision numbers and a
``rounded`` block of human-readable copies.  Tables are CSV.

Exit codes:
  0  success and every requested check passed
  1  a requested check failed
  2  usage error
  3  malformed or invalid model input
  4  infeasible flag combination or parameter value
  5  exact enumeration cap exceeded
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .fptas import FptasConfig, NoMixingRegimeError, approx_log_partition
from .graph import GraphError, generate, max_avg_degree, sparsity_report
from .marginal import exact_root_marginal, marginal_difference_bound, truncated_root_marginal
from .mixing import (DomainError, Regime, classify_mixing, critical_J, decay_csv, empirical_decay,
                     field_threshold, run_inequality_suite)
from .model import ModelError, Spin, derive_parameters, make_ising, validate_system, SpinSystem
from .modelfile import ModelFileError, dump_model, load_model
from .oracle import DEFAULT_CAP, OracleCapError, exact_log_partition, exact_marginal
from .sawtree import build_saw_tree, size_bound_violations, to_dot, to_outline, tree_stats

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAP = 0, 1, 2, 3, 4, 5
WORKERS_ENV = "SAWSPIN_WORKERS"


class Infeasible(Exception):
    """Flags that parse but cannot be honoured."""


# ---------------------------------------------------------------------------
# output helpers


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, Regime):
        return x.value
    return x


def _round(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _emit(report: dict, rounded: dict | None = None) -> None:
    if rounded:
        report = {**report, "rounded": {k: _round(v) for k, v in rounded.items()}}
    sys.stdout.write(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# flag parsing


def _condition(text: str | None) -> dict[int, int]:
    """``"0=+,3=-"`` to ``{0: 1, 3: -1}``."""
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        v, sep, s = part.partition("=")
        if not sep:
            raise Infeasible(f"condition entry {part!r} is not of the form vertex=spin")
        try:
            out[int(v)] = int(Spin.parse(s.strip()))
        except (ValueError, ModelError) as e:
            raise Infeasible(f"bad condition entry {part!r}") from e
    return out


def _check_condition(system: SpinSystem, cond: dict[int, int], vertex: int | None = None) -> None:
    for v in cond:
        if not 0 <= v < system.n:
            raise Infeasible(f"condition names vertex {v}, model has {system.n}")
    if vertex is not None:
        if not 0 <= vertex < system.n:
            raise Infeasible(f"vertex {vertex} not in model with {system.n} vertices")
        if vertex in cond:
            raise Infeasible(f"vertex {vertex} is itself conditioned")


def _resolve_d(args, system: SpinSystem) -> float:
    if args.d is None:
        return float(max(system.graph.max_degree(), 1))
    if args.d == "auto":
        if args.radius is None:
            raise Infeasible("--d auto needs --radius")
        if args.radius < 1:
            raise Infeasible("--radius must be at least 1")
        return max(max_avg_degree(system.graph, args.radius), 1.0)
    try:
        d = float(args.d)
    except ValueError:
        raise Infeasible(f"--d must be a number or 'auto', got {args.d!r}") from None
    if not d >= 1:
        raise Infeasible("--d must be at least 1")
    return d


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        raise Infeasible(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _load(args) -> SpinSystem:
    system = load_model(args.model)
    report = validate_system(system)
    if not report.ok:
        raise ModelError(str(report))
    return system


def _init_value(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"init must be a number in [0, 1], got {text!r}") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError("init must lie in [0, 1]")
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_exact_z(args) -> int:
    system = _load(args)
    cond = _condition(args.condition)
    _check_condition(system, cond)
    lz = exact_log_partition(system, cond, cap=args.cap, workers=_workers(args))
    _emit({"command": "exact-z", "log_Z": lz, "condition": cond, "free_vertices": system.n - len(cond)},
          {"log_Z": lz})
    return EXIT_OK


def cmd_approx_z(args) -> int:
    system = _load(args)
    if not args.epsilon > 0:
        raise Infeasible("--epsilon must be positive")
    depth = args.depth_override
    if depth is not None:
        depth = math.inf if depth == "inf" else int(depth)
        if depth < 1:
            raise Infeasible("--depth-override must be at least 1")
    if args.verify and system.n > args.cap:
        raise OracleCapError(f"--verify needs enumeration of {system.n} vertices, cap is {args.cap}")
    cfg = FptasConfig(epsilon=args.epsilon, depth_override=depth, d_parameter=_resolve_d(args, system),
                      init=args.init, condition_spin=args.condition_spin,
                      per_vertex_field=args.per_vertex_field)
    res = approx_log_partition(system, cfg, workers=_workers(args))
    report = {
        "command": "approx-z",
        "log_Z_hat": res.log_Z_hat,
        "epsilon": res.epsilon,
        "guarantee_met": res.guarantee_met,
        "error_bound": res.error_bound,
        "regime": res.regime,
        "bound": res.bound,
        "total_nodes": res.total_nodes,
        "max_tree_nodes": res.max_tree_nodes,
        "per_vertex": [asdict(v) for v in res.per_vertex],
    }
    rounded = {"log_Z_hat": res.log_Z_hat, "error_bound": res.error_bound}
    status = EXIT_OK
    if args.verify:
        lz = exact_log_partition(system, cap=args.cap, workers=_workers(args))
        err = abs(res.log_Z_hat - lz)
        ok = err <= args.epsilon
        report["verify"] = {"log_Z": lz, "abs_error": err, "within_epsilon": ok}
        rounded.update(log_Z=lz, abs_error=err)
        status = EXIT_OK if ok else EXIT_CHECK
    _emit(report, rounded)
    return status


def cmd_marginal(args) -> int:
    system = _load(args)
    cond = _condition(args.condition)
    _check_condition(system, cond, args.vertex)
    if args.depth is not None and args.depth < 1:
        raise Infeasible("--depth must be at least 1")
    tree = build_saw_tree(system, args.vertex, cond, depth_limit=args.depth)
    if args.depth is None:
        res = exact_root_marginal(tree)
    else:
        res = truncated_root_marginal(tree, args.depth, args.init)
        res = res.with_bound(marginal_difference_bound(tree, args.depth, derive_parameters(system)))
    report = {"command": "marginal", "vertex": args.vertex, "condition": cond, "p_plus": res.p_plus,
              "log_ratio": res.log_ratio, "depth_used": res.depth_used, "error_bound": res.error_bound,
              "tree_nodes": tree.size}
    rounded = {"p_plus": res.p_plus}
    status = EXIT_OK
    if args.oracle:
        p = exact_marginal(system, args.vertex, cond, cap=args.cap, workers=_workers(args))
        diff = abs(p - res.p_plus)
        report["oracle"] = {"p_plus": p, "abs_error": diff}
        rounded["oracle_p_plus"] = p
        if res.error_bound is not None and diff > res.error_bound:
            status = EXIT_CHECK
    _emit(report, rounded)
    return status


def cmd_saw_tree(args) -> int:
    system = _load(args)
    cond = _condition(args.condition)
    _check_condition(system, cond, args.vertex)
    if args.depth is not None and args.depth < 0:
        raise Infeasible("--depth must be non-negative")
    tree = build_saw_tree(system, args.vertex, cond, depth_limit=args.depth)
    text = to_dot(tree) if args.format == "dot" else to_outline(tree)
    stats = {"command": "saw-tree", "vertex": args.vertex, "condition": cond, **asdict(tree_stats(tree))}
    if args.out:
        Path(args.out).write_text(text + "\n")
        stats["written_to"] = str(args.out)
        _emit(stats)
    else:
        sys.stdout.write(text + "\n")
        sys.stderr.write(json.dumps(_clean(stats), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_metrics(args) -> int:
    system = _load(args)
    g = system.graph
    if args.radius < 1:
        raise Infeasible("--radius must be at least 1")
    vertices = range(g.n) if args.vertex is None else [args.vertex]
    if args.vertex is not None and not 0 <= args.vertex < g.n:
        raise Infeasible(f"vertex {args.vertex} not in graph")
    rows = [asdict(sparsity_report(g, v, args.radius)) for v in vertices]
    report = {"command": "metrics", "radius": args.radius, "Delta": max_avg_degree(g, args.radius)
              if g.n else None, "vertices": rows}
    status = EXIT_OK
    if args.check:
        ls = tuple(range(1, args.radius + 1))
        js = tuple(range(1, args.compose + 1))
        viol = size_bound_violations(g, ls, js) if g.n else {}
        report["checks"] = {"budgets": ls, "compositions": js, **viol,
                            "passed": not any(viol.get(k) for k in ("path_density", "sphere", "ball"))}
        status = EXIT_OK if report["checks"]["passed"] else EXIT_CHECK
    _emit(report, {"Delta": report["Delta"]})
    return status


def _threshold(d, alpha, gamma):
    try:
        return field_threshold(d, alpha, gamma), None
    except DomainError as e:
        return None, str(e)


def cmd_check_conditions(args) -> int:
    system = _load(args)
    d = _resolve_d(args, system)
    params = derive_parameters(system)
    bound = classify_mixing(params, d, per_vertex=args.per_vertex)
    jd = critical_J(d)
    report = {"command": "check-conditions", "d": d, "parameters": params.as_dict(), "J_d": jd,
              "regime": bound.regime.value, "rate": bound.rate, "coefficient": bound.coefficient,
              "branch": bound.branch, "log_form": bound.log_form}
    if params.gamma is not None:
        up, why = _threshold(d, params.alpha_max, params.gamma)
        down, _ = _threshold(d, -params.alpha_min, params.gamma)
        report["field_threshold_plus"] = up
        report["field_threshold_minus"] = None if down is None else -down
        if why:
            report["field_threshold_note"] = why
    _emit(report, {"J": params.J, "J_d": jd, "rate": bound.rate})
    return EXIT_OK if bound.regime is not Regime.NONE else EXIT_CHECK


def _t_values(args) -> list[int]:
    if args.t:
        ts = [int(x) for x in args.t.split(",") if x.strip()]
    else:
        ts = list(range(1, args.t_max + 1))
    if not ts or min(ts) < 1:
        raise Infeasible("depths must be positive")
    return ts


def cmd_decay_scan(args) -> int:
    system = _load(args)
    cond = _condition(args.condition)
    _check_condition(system, cond, args.vertex)
    d = _resolve_d(args, system)
    rows = empirical_decay(system, args.vertex, _t_values(args), d=d, strategy=args.strategy,
                           boundary=cond, per_vertex=args.per_vertex)
    sys.stdout.write(decay_csv(rows, rounded=True))
    within = all(r.observed <= r.bound for r in rows)
    return EXIT_OK if within or not args.check else EXIT_CHECK


def cmd_verify_props(args) -> int:
    if args.samples < 1:
        raise Infeasible("--samples must be positive")
    counts = run_inequality_suite(args.samples, args.seed, args.grid)
    ok = not any(counts.values())
    _emit({"command": "verify-props", "samples": args.samples, "seed": args.seed, "grid": args.grid,
           "violations": counts, "passed": ok})
    return EXIT_OK if ok else EXIT_CHECK


def cmd_generate(args) -> int:
    try:
        g = generate(args.kind, args.size, d=args.degree, p=args.p, depth=args.depth, seed=args.seed)
    except (GraphError, ValueError) as e:
        raise Infeasible(str(e)) from e
    if args.random_potentials is not None:
        rng = np.random.default_rng(args.seed)
        s = args.random_potentials
        system = SpinSystem(g, rng.uniform(-s, s, size=(len(g.edges), 4)), rng.uniform(-s, s, size=(g.n, 2)))
    else:
        system = make_ising(g, args.ising_J, args.ising_B)
    text = json.dumps(_clean(dump_model(system)), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sawspin", description=__doc__.split("\n")[0],
                                epilog=f"Worker processes default to ${WORKERS_ENV} (1 if unset).")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("model", help="JSON model file")
        sp.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV})")
        sp.set_defaults(fn=fn)
        return sp

    def cap(sp):
        sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="max free vertices for enumeration")

    def dflag(sp):
        sp.add_argument("--d", default=None, help="sparsity parameter: number or 'auto' (default: max degree)")
        sp.add_argument("--radius", type=int, default=None, help="path budget for --d auto")

    sp = model_cmd("exact-z", cmd_exact_z, "log Z by exhaustive enumeration")
    sp.add_argument("--condition", help="boundary such as '0=+,3=-'")
    cap(sp)

    sp = model_cmd("approx-z", cmd_approx_z, "log Z by the truncated-tree approximation")
    sp.add_argument("--epsilon", type=float, default=0.1)
    dflag(sp)
    sp.add_argument("--depth-override", default=None, help="fixed truncation depth or 'inf'")
    sp.add_argument("--init", type=_init_value, default=0.5, help="stand-in probability at the cut (0..1)")
    sp.add_argument("--condition-spin", choices=("plus", "favored"), default="plus")
    sp.add_argument("--per-vertex-field", action="store_true", help="check the field condition per vertex")
    sp.add_argument("--verify", action="store_true", help="compare with exact enumeration")
    cap(sp)

    sp = model_cmd("marginal", cmd_marginal, "P(X_v = +) on the self-avoiding-walk tree")
    sp.add_argument("--vertex", type=int, required=True)
    sp.add_argument("--condition")
    sp.add_argument("--depth", type=int, default=None, help="truncation depth (exact if omitted)")
    sp.add_argument("--init", type=_init_value, default=0.5)
    sp.add_argument("--oracle", action="store_true", help="also report the enumerated marginal")
    cap(sp)

    sp = model_cmd("saw-tree", cmd_saw_tree, "build and export a self-avoiding-walk tree")
    sp.add_argument("--vertex", type=int, required=True)
    sp.add_argument("--condition")
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--format", choices=("outline", "dot"), default="outline")
    sp.add_argument("--out", help="write the tree here and print stats to stdout")

    sp = model_cmd("metrics", cmd_metrics, "path density, average path degree and maximum average degree")
    sp.add_argument("--radius", type=int, required=True)
    sp.add_argument("--vertex", type=int, default=None)
    sp.add_argument("--check", action="store_true", help="verify the composition and tree-size bounds")
    sp.add_argument("--compose", type=int, default=3, help="largest composition factor j for --check")

    sp = model_cmd("check-conditions", cmd_check_conditions, "derived parameters and decay regime")
    dflag(sp)
    sp.add_argument("--per-vertex", action="store_true")

    sp = model_cmd("decay-scan", cmd_decay_scan, "observed vs bounded influence of the depth-t boundary (CSV)")
    sp.add_argument("--vertex", type=int, required=True)
    sp.add_argument("--condition")
    sp.add_argument("--t", help="comma-separated depths")
    sp.add_argument("--t-max", type=int, default=6)
    sp.add_argument("--strategy", choices=("extremal", "signed", "exhaustive"), default="extremal")
    sp.add_argument("--per-vertex", action="store_true")
    sp.add_argument("--check", action="store_true", help="exit 1 if any observation exceeds its bound")
    dflag(sp)

    sp = sub.add_parser("verify-props", help="random checks of the recursion inequalities")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid", type=int, default=1000)
    sp.set_defaults(fn=cmd_verify_props)

    sp = sub.add_parser("generate", help="write a generated model file")
    sp.add_argument("kind", choices=("path", "cycle", "complete", "star", "grid", "complete_binary_tree",
                                     "regular_tree", "random_regular", "erdos_renyi"))
    sp.add_argument("--size", type=int, default=0)
    sp.add_argument("--degree", type=int, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--depth", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ising-J", type=float, default=0.0)
    sp.add_argument("--ising-B", type=float, default=0.0)
    sp.add_argument("--random-potentials", type=float, default=None, metavar="SCALE",
                    help="uniform beta and h in [-SCALE, SCALE] instead of Ising")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.fn(args)
    except (ModelFileError, ModelError, FileNotFoundError, IsADirectoryError) as e:
        print(f"sawspin: invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OracleCapError as e:
        print(f"sawspin: {e}", file=sys.stderr)
        return EXIT_CAP
    except (Infeasible, NoMixingRegimeError, DomainError, GraphError, ValueError) as e:
        print(f"sawspin: infeasible request: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
