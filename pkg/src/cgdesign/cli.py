"""Command-line entry point.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success, 1 failed
invariant battery, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import graph as gr
from .design import SYMBOLS, ConflictGraphDesign, prob_pair, prob_single
from .estimand import EstimandError, build_conflict_graph, load_estimand
from .estimator import estimate, read_outcomes_csv
from .graph import ConvergenceError, GraphError
from .ordering import eigenvector_ordering, sequential_degree_ordering

GRAPH_KINDS = ("pa", "er", "path", "star", "clique", "empty", "hub_cliques", "clique_of_cliques")
_CODES = {v: k for k, v in SYMBOLS.items()}


class UsageError(Exception):
    pass


def _add_common(sp, *, estimand=True, r=False):
    sp.add_argument("--graph", required=True, help="edge-list file ('n <count>' then 'i j' lines)")
    if estimand:
        sp.add_argument("--estimand", default="direct",
                        help="estimand JSON file, or 'direct' / 'gate' (default direct)")
    if r:
        sp.add_argument("--r", type=float, default=2.0, help="sampling parameter r (default 2)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS,
                        help="output format (default json)")

    p = argparse.ArgumentParser(prog="cgdesign", description="Conflict graph design toolkit.")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("gen-graph", parents=[common], help="generate a graph as an edge list")
    s.add_argument("--kind", choices=GRAPH_KINDS, required=True, help="generator")
    s.add_argument("--n", type=int, required=True, help="number of units (base size for hub_cliques)")
    s.add_argument("--m", type=int, default=4, help="edges per arrival for pa (default 4)")
    s.add_argument("--r-exp", type=float, default=1.0, help="degree exponent for pa (default 1)")
    s.add_argument("--p", type=float, default=0.1, help="edge probability for er (default 0.1)")
    s.add_argument("--out", help="write to this file instead of stdout")

    s = sub.add_parser("conflict-graph", parents=[common], help="build the conflict graph of an estimand")
    _add_common(s)

    s = sub.add_parser("ordering", parents=[common], help="importance ordering of the conflict graph")
    _add_common(s)
    s.add_argument("--method", choices=("eigenvector", "degree"), default="eigenvector",
                   help="eigenvector or sequential-degree ordering (default eigenvector)")

    s = sub.add_parser("lambda", parents=[common], help="largest eigenvalue of the conflict graph")
    _add_common(s)

    s = sub.add_parser("sample", parents=[common], help="draw desired exposures and interventions")
    _add_common(s, r=True)
    s.add_argument("--draws", type=int, default=1, help="number of draws (default 1)")

    s = sub.add_parser("probs", parents=[common], help="exact desired-event probabilities")
    _add_common(s, r=True)
    s.add_argument("--unit", type=int, required=True, help="unit i")
    s.add_argument("--contrast", type=int, choices=(0, 1), required=True, help="k: 1 = e1, 0 = e0")
    s.add_argument("--unit2", type=int, help="second unit j for a joint probability")
    s.add_argument("--contrast2", type=int, choices=(0, 1), help="l for the second unit")

    s = sub.add_parser("estimate", parents=[common], help="estimate the effect from sampled draws")
    _add_common(s, r=True)
    s.add_argument("--outcomes", required=True, help="CSV with columns unit,y1,y0")
    s.add_argument("--draws", required=True, help="file of draws as printed by 'sample' ('-' for stdin)")
    s.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison of designs")
    s.add_argument("--graph", help="edge-list file (overrides --kind)")
    s.add_argument("--kind", choices=GRAPH_KINDS, default="pa", help="generator (default pa)")
    s.add_argument("--n", type=int, default=500, help="graph size (default 500)")
    s.add_argument("--m", type=int, default=4, help="edges per arrival for pa (default 4)")
    s.add_argument("--r-exp", type=float, default=1.5, help="degree exponent for pa (default 1.5)")
    s.add_argument("--p", type=float, default=0.1, help="edge probability for er (default 0.1)")
    s.add_argument("--estimand", default="direct", help="estimand JSON file or 'direct' / 'gate'")
    s.add_argument("--designs", default="cgd,bernoulli,independent_set",
                   help="comma-separated subset of cgd,bernoulli,independent_set")
    s.add_argument("--outcomes", default="large",
                   help="large, medium, hub, or a CSV with columns unit,y1,y0 (default large)")
    s.add_argument("--replicates", type=int, default=1000, help="replicates (default 1000)")
    s.add_argument("--mc-draws", type=int, default=10_000,
                   help="draws for exposure probabilities (default 10000)")
    s.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")
    s.add_argument("--r", type=float, default=2.0, help="sampling parameter r (default 2)")
    s.add_argument("--out", help="write to this file instead of stdout")

    s = sub.add_parser("oracle-check", parents=[common], help="run the exact-enumeration invariant battery")
    s.add_argument("--r", type=float, default=2.0, help="sampling parameter r (default 2)")
    return p


# ---------------------------------------------------------------------------


def _load(args):
    g = gr.read_edge_list(args.graph)
    est = load_estimand(args.estimand)
    return g, est


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _scalar(value, name, fmt) -> str:
    if fmt == "csv":
        return _rows_csv([name], [[repr(value)]])
    return json.dumps(value) + "\n"


def cmd_gen_graph(args) -> str:
    rng = np.random.default_rng(args.seed)
    spec = {"kind": args.kind, "n": args.n, "m": args.m, "r_exp": args.r_exp, "p": args.p}
    from .sim import build_graph

    g = build_graph(spec, rng)
    buf = io.StringIO()
    buf.write(f"n {g.n}\n")
    for i, j in g.edges():
        buf.write(f"{i} {j}\n")
    return _to_file_or_text(buf.getvalue(), args.out)


def _to_file_or_text(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
        return ""
    return text


def cmd_conflict_graph(args) -> str:
    g, est = _load(args)
    h = build_conflict_graph(g, est)
    edges = h.edges().tolist()
    if args.format == "csv":
        return _rows_csv(["i", "j"], edges)
    return json.dumps({"n": h.n, "self_loops": True, "edges": edges}) + "\n"


def cmd_ordering(args) -> str:
    g, est = _load(args)
    h = build_conflict_graph(g, est)
    if args.method == "degree":
        o = sequential_degree_ordering(h)
    else:
        o = eigenvector_ordering(h, gr.largest_eigenvalue(h))
    order = o.order.tolist()
    if args.format == "csv":
        return _rows_csv(["position", "unit"], list(enumerate(order)))
    return json.dumps(order) + "\n"


def cmd_lambda(args) -> str:
    g, est = _load(args)
    lam = gr.largest_eigenvalue(build_conflict_graph(g, est)).lam
    return _scalar(round(lam, 12), "lambda", args.format)


def cmd_sample(args) -> str:
    g, est = _load(args)
    if args.draws < 1:
        raise UsageError("--draws must be at least 1")
    design = ConflictGraphDesign.prepare(g, est, r=args.r)
    rng = np.random.default_rng(args.seed)
    lines = []
    for _ in range(args.draws):
        d = design.sample(rng)
        lines.append(f"{d.u_string()} {d.z_string()}\n")
    return "".join(lines)


def cmd_probs(args) -> str:
    g, est = _load(args)
    design = ConflictGraphDesign.prepare(g, est, r=args.r)
    n = g.n
    for u in (args.unit, args.unit2):
        if u is not None and not (0 <= u < n):
            raise UsageError(f"unit {u} out of range [0, {n})")
    if (args.unit2 is None) != (args.contrast2 is None):
        raise UsageError("--unit2 and --contrast2 go together")
    if args.unit2 is None:
        val = prob_single(args.unit, args.contrast, design.ordering, design.params)
    else:
        val = prob_pair(args.unit, args.contrast, args.unit2, args.contrast2,
                        design.h, design.ordering, design.params)
    return _scalar(val, "probability", args.format)


def _parse_draws(text: str, n: int):
    draws = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or len(parts[0]) != n or len(parts[1]) != n:
            raise UsageError(f"draw line {lineno}: expected '<U string> <Z bits>' of length {n}")
        try:
            u = np.array([_CODES[c] for c in parts[0]], dtype=np.int8)
            z = np.array([int(c) for c in parts[1]], dtype=np.int8)
        except (KeyError, ValueError):
            raise UsageError(f"draw line {lineno}: U uses 1/0/*, Z uses 0/1") from None
        draws.append((lineno, u, z))
    if not draws:
        raise UsageError("no draws given")
    return draws


def cmd_estimate(args) -> str:
    g, est = _load(args)
    design = ConflictGraphDesign.prepare(g, est, r=args.r)
    outcomes = read_outcomes_csv(args.outcomes)
    if outcomes.n != g.n:
        raise UsageError(f"outcomes cover {outcomes.n} units but the graph has {g.n}")
    if not (0 < args.alpha <= 1):
        raise UsageError("--alpha must lie in (0, 1]")
    text = sys.stdin.read() if args.draws == "-" else open(args.draws).read()
    reports = []
    for lineno, u, z in _parse_draws(text, g.n):
        if not np.array_equal(design.realize(u), z):
            raise UsageError(f"draw line {lineno}: Z is not the design's output for U")
        reports.append(estimate(outcomes, design, u, alpha=args.alpha).to_dict())
    if args.format == "csv":
        header = ["draw", "tau_hat", "vb", "vb_hat", "var_exact", "alpha",
                  "cheb_lo", "cheb_hi", "wald_lo", "wald_hi"]
        rows = [[k, r["tau_hat"], r["vb"], r["vb_hat"], r["var_exact"], r["alpha"],
                 *r["ci_cheb"], *r["ci_wald"]] for k, r in enumerate(reports)]
        return _rows_csv(header, rows)
    return "".join(json.dumps(r) + "\n" for r in reports)


def cmd_simulate(args) -> str:
    from .sim import SimConfig, emit, run_simulation

    if args.graph:
        graph = args.graph
    else:
        graph = {"kind": args.kind, "n": args.n, "m": args.m, "r_exp": args.r_exp, "p": args.p}
    designs = tuple(d.strip() for d in args.designs.split(",") if d.strip())
    cfg = SimConfig(graph=graph, estimand=args.estimand, designs=designs, outcomes=args.outcomes,
                    replicates=args.replicates, mc_prob_draws=args.mc_draws, alpha=args.alpha,
                    r=args.r, seed=args.seed)
    text = emit(run_simulation(cfg), args.format)
    return _to_file_or_text(text, args.out)


def cmd_oracle_check(args):
    from .oracle import run_battery

    rep = run_battery(r=args.r, seed=args.seed)
    text = json.dumps(_plain(rep), indent=2) + "\n"
    return text, (0 if rep["passed"] else 1)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "conflict-graph": cmd_conflict_graph,
    "ordering": cmd_ordering,
    "lambda": cmd_lambda,
    "sample": cmd_sample,
    "probs": cmd_probs,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        result = COMMANDS[args.command](args)
    except (UsageError, GraphError, EstimandError, ConvergenceError, ValueError, OSError) as exc:
        print(f"cgdesign {args.command}: error: {exc}", file=sys.stderr)
        return 2
    code = 0
    if isinstance(result, tuple):
        result, code = result
    sys.stdout.write(result)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
