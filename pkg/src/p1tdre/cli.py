"""Command-line front end.

Results are JSON on stdout (or in ``--output``); a one-line summary goes
to stderr.  Exit status is 0 on success, 1 for bad input and 2 when the
input is valid but an estimator or fit is undefined on it.  Failures
still print a JSON error object.

The environment variable ``P1TDRE_THREADS`` caps the BLAS thread pool.  It
can only lower the pool size: some OpenBLAS builds crash when asked for
more threads than they started with, so larger values are clamped.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import plug_in
from .errors import DataError, DegeneracyError, EmptyFilter, P1Error
from .estimator import estimate_all, estimate_filtered, gamma_filter
from .experiments import ExperimentConfig, resolve_theta, run_coverage, run_error_table, run_timing
from .inference import (
    Fit,
    compare_graphs,
    fit,
    test_alpha_equality,
    test_beta_equality,
    test_reciprocity,
)
from .io import dump_json, read_edge_list, read_params, write_edge_list, write_params
from .mle import fit_mle
from .model import linear_design, sample_graph, tally

THREADS_ENV = "P1TDRE_THREADS"


class UsageError(DataError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(payload: dict, args, summary: str) -> None:
    text = dump_json(payload)
    if getattr(args, "output", None):
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    print(summary, file=sys.stderr)


def _graph(args):
    return read_edge_list(args.input, args.nodes)


def cmd_simulate(args) -> dict:
    if args.params:
        params = read_params(args.params)
    else:
        if args.n is None:
            raise UsageError("simulate needs --n or --params")
        params = linear_design(args.n, args.rho, resolve_theta(args.theta, args.n))
    g = sample_graph(params, args.seed)
    write_edge_list(g, args.edges)
    if args.params_out:
        write_params(params, args.params_out)
    return {"n": g.n, "edges": g.num_edges, "density": g.density(), "seed": args.seed,
            "path": args.edges}


def _with_table(out: dict, f: Fit, args) -> dict:
    if args.emit_asymptotics:
        out["asymptotics"] = f.table.to_dict()
    return out


def cmd_estimate(args) -> dict:
    g = _graph(args)
    rep = estimate_all(tally(g), args.method)
    out = rep.to_dict()
    if args.emit_asymptotics:
        out["asymptotics"] = plug_in(rep).to_dict()
    return out


def cmd_mle(args) -> dict:
    g = _graph(args)
    return fit_mle(g, tol=args.tolerance, max_iter=args.max_iter).to_dict()


def cmd_test_reciprocity(args) -> dict:
    f = fit(tally(_graph(args)), args.method)
    rep = test_reciprocity(None, args.level, fitted=f)
    return _with_table({"test": rep.to_dict(), "estimate": f.report.to_dict()}, f, args)


def cmd_test_equality(args) -> dict:
    f = fit(tally(_graph(args)), args.method)
    test = test_alpha_equality if args.param == "alpha" else test_beta_equality
    rep = test(None, args.indices, args.level, fitted=f)
    return _with_table({"test": rep.to_dict()}, f, args)


def cmd_compare(args) -> dict:
    f1 = fit(tally(read_edge_list(args.input, args.nodes)), args.method)
    f2 = fit(tally(read_edge_list(args.input2, args.nodes)), args.method)
    rep = compare_graphs(None, None, args.level, fitted1=f1, fitted2=f2)
    return {"test": rep.to_dict(), "rho": [f1.report.rho, f2.report.rho]}


def cmd_analyze(args) -> dict:
    g = _graph(args)
    t = tally(g)
    gamma = gamma_filter(t, args.min_out, args.min_in, args.method)
    if gamma.size == 0:
        raise EmptyFilter(
            f"no node has out-degree >= {args.min_out}, in-degree >= {args.min_in} "
            "and positive anchor counts"
        )
    rep = estimate_filtered(t, gamma, args.method)
    f = Fit(rep, plug_in(rep))
    test = test_reciprocity(None, args.level, fitted=f)
    hist = {}
    for name, values in (("alpha", rep.alpha[gamma]), ("beta", rep.beta[gamma])):
        counts, edges = np.histogram(values, bins=args.bins)
        hist[name] = {"counts": counts.tolist(), "edges": edges.tolist()}
    out = {
        "n": g.n,
        "edges": g.num_edges,
        "gamma_size": int(gamma.size),
        "gamma": gamma.tolist(),
        "estimate": rep.to_dict(),
        "reciprocity": test.to_dict(),
        "histogram": hist,
    }
    return _with_table(out, f, args)


def cmd_bench(args) -> dict:
    cfg = ExperimentConfig.from_file(args.config)
    cfg.seed = args.seed
    outdir = args.output or cfg.outputs
    if args.workers is not None:
        cfg.workers = args.workers
    runs = {
        "errors": lambda: run_error_table(cfg),
        "timing": lambda: run_timing(cfg),
        "coverage": lambda: run_coverage(cfg),
    }
    kinds = list(runs) if args.kind == "all" else [args.kind]
    written = {k: runs[k]().write(outdir) for k in kinds}
    args.output = None  # the directory holds the results; the manifest goes to stdout
    return {"outputs": str(outdir), "files": written}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="p1tdre", description="Triple-dyad ratio estimation for the p1 model.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def graph_cmd(name, help_, func):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", "-i", required=True, help="edge list, one 'src,dst' per line")
        p.add_argument("--nodes", type=int, help="node count (default: 1 + largest label)")
        p.add_argument("--method", choices=["auto", "dense", "sparse"], default="auto")
        p.add_argument("--output", "-o", help="write JSON here instead of stdout")
        p.set_defaults(func=func)
        return p

    p = sub.add_parser("simulate", help="sample a graph from the p1 model")
    p.add_argument("--n", type=int, help="nodes (linear degree design)")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--theta", default="0",
                   help="number, '-log(n)/c' or '-log(log(n))' (pass as --theta=-log(n)/2)")
    p.add_argument("--params", help="parameter JSON instead of the linear design")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--edges", required=True, help="edge list to write")
    p.add_argument("--params-out", help="also write the parameters used")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_simulate)

    for name, help_, func in (
        ("estimate", "triple-dyad ratio estimates", cmd_estimate),
        ("test-reciprocity", "test rho = 0", cmd_test_reciprocity),
        ("test-equality", "test equal degree parameters", cmd_test_equality),
        ("analyze", "filtered estimation and reciprocity test", cmd_analyze),
    ):
        p = graph_cmd(name, help_, func)
        p.add_argument("--emit-asymptotics", action="store_true",
                       help="include the plug-in asymptotic table")
        if name != "estimate":
            p.add_argument("--level", type=float, default=0.05)
    q = sub.choices["test-equality"]
    q.add_argument("--indices", required=True,
                   type=lambda s: [int(x) for x in s.split(",")], help="comma-separated nodes")
    q.add_argument("--param", choices=["alpha", "beta"], default="alpha")
    a = sub.choices["analyze"]
    a.add_argument("--min-in", type=int, default=5)
    a.add_argument("--min-out", type=int, default=5)
    a.add_argument("--bins", type=int, default=20)

    p = graph_cmd("mle", "maximum-likelihood fit", cmd_mle)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100)

    p = graph_cmd("compare", "compare reciprocity of two graphs", cmd_compare)
    p.add_argument("--input2", required=True)
    p.add_argument("--level", type=float, default=0.05)

    p = sub.add_parser("bench", help="run the Monte Carlo suite from a config file")
    p.add_argument("--config", required=True, help="JSON or TOML experiment config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kind", choices=["errors", "timing", "coverage", "all"], default="all")
    p.add_argument("--workers", type=int)
    p.add_argument("--output", "-o", help="results directory (overrides the config)")
    p.set_defaults(func=cmd_bench)
    return parser


def _summary(command: str, out: dict) -> str:
    if "test" in out:
        t = out["test"]
        return f"{command}: statistic={t['statistic']} p={t['p_value']} reject={t['reject']}"
    if "reciprocity" in out:
        t = out["reciprocity"]
        return f"{command}: |Gamma|={out['gamma_size']} p={t['p_value']} reject={t['reject']}"
    if "theta" in out:
        return f"{command}: theta={out['theta']} rho={out['rho']}"
    return f"{command}: ok"


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    from threadpoolctl import threadpool_info, threadpool_limits

    try:
        wanted = int(value)
    except ValueError:
        raise DataError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    current = max((p["num_threads"] for p in threadpool_info()), default=1)
    return threadpool_limits(limits=max(1, min(wanted, current)))


def main(argv=None) -> int:
    args = None
    try:
        args = build_parser().parse_args(argv)
        limiter = _thread_limit()
        try:
            out = args.func(args)
        finally:
            if limiter is not None:
                limiter.unregister()
        _emit(out, args, _summary(args.command, out))
        return 0
    except (DataError, OSError, UnicodeDecodeError) as exc:
        payload = exc.to_dict() if isinstance(exc, P1Error) else {
            "error": type(exc).__name__, "message": str(exc)}
        code = 1
    except DegeneracyError as exc:
        payload, code = exc.to_dict(), 2
    payload["exit_code"] = code
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    print(f"error: {payload['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
