"""Command-line interface.

Exit status: 0 success, 1 a verification found a mismatch, 2 usage error,
3 precondition violated, 4 graph generation ran out of retries, 5 exact
oracle size cap exceeded, 6 solver failed to converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dist, exact_oracle, sweep
from .boolean_net import BooleanFunctionOracle, find_attractor, format_trajectory_csv, trajectory
from .errors import ConvergenceError, GenerationError, OracleCapError, PreconditionError
from .graphgen import (generate_rbn2, generate_rbn3, generate_rbn4, format_edge_list,
                       graph_digest, read_edge_list, reverse)
from .keyed import CoinStream, TAG_DUAL, TAG_FORWARD, derive_seed
from .threshold_cp import run_dual, run_tcp

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_PRECONDITION, EXIT_GENERATION, EXIT_CAP, EXIT_CONVERGENCE = range(7)

# Sub-seeds of the global --seed.
SEED_GRAPH, SEED_COINS, SEED_ORACLE, SEED_STATE, SEED_SUITE = range(1, 6)

log = logging.getLogger("rbnsim")


def g10(x) -> str:
    return f"{x:.10g}"


def _emit(args, text: str) -> None:
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _table(args, header: list[str], rows: list[list]) -> str:
    if args.format == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(g10(v) if isinstance(v, float) else ("" if v is None else str(v)) for v in r))
    return "\n".join(lines) + "\n"


def _q(args) -> float:
    if args.q is not None:
        if not 0.0 <= args.q <= 1.0:
            raise PreconditionError(f"q must lie in [0, 1], got {args.q!r}")
        return args.q
    if args.p is not None:
        return dist.q_from_bias(args.p)
    raise PreconditionError("give --q or --p")


def _add_q(p: argparse.ArgumentParser) -> None:
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--q", type=float, help="contact/change probability")
    grp.add_argument("--p", type=float, help="expression bias; q = 2p(1-p)")


def _add_graph_source(p: argparse.ArgumentParser, default_model: str = "rbn2") -> None:
    p.add_argument("--graph", help="edge-list file (overrides --model)")
    p.add_argument("--model", choices=sweep.MODELS, default=default_model)
    p.add_argument("--n", type=int, help="node count for generated graphs")
    p.add_argument("--r", type=int, help="in-degree for rbn1")
    p.add_argument("--pmf", help="degree pmf file: lines 'k p_k' (out-degree law for rbn3)")
    p.add_argument("--in-pmf", help="in-degree pmf file for rbn3 (defaults to --pmf)")
    p.add_argument("--joint", help="joint pmf file: lines 'k l p_kl' (rbn4)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--multigraph", action="store_true", help="rbn3/rbn4: keep self-loops and multi-edges")
    mode.add_argument("--erase", action="store_true",
                      help="rbn3/rbn4: drop self-loops and duplicates instead of resampling "
                           "(departs from the conditioned law)")
    p.add_argument("--max-retries", type=int, default=10**6)


def _graph(args):
    if args.graph:
        return read_edge_list(args.graph), "file"
    if args.n is None:
        raise PreconditionError("give --graph or --n with a model")
    rng = np.random.default_rng(derive_seed(args.seed, SEED_GRAPH))
    if args.model == "rbn1":
        if args.r is None:
            raise PreconditionError("rbn1 needs --r")
        return generate_rbn2(args.n, dist.Pmf.delta(args.r), rng), "rbn1"
    if args.model == "rbn2":
        return generate_rbn2(args.n, _need(args, "pmf", dist.load_pmf), rng), "rbn2"
    kw = dict(simple_mode=not (args.multigraph or args.erase), erase=args.erase,
              max_retries=args.max_retries)
    if args.model == "rbn3":
        out_pmf = _need(args, "pmf", dist.load_pmf)
        in_pmf = dist.load_pmf(args.in_pmf) if args.in_pmf else out_pmf
        return generate_rbn3(args.n, out_pmf, in_pmf, rng, **kw).graph, "rbn3"
    return generate_rbn4(args.n, _need(args, "joint", dist.load_joint), rng, **kw).graph, "rbn4"


def _need(args, name, loader):
    path = getattr(args, name)
    if not path:
        raise PreconditionError(f"--{name.replace('_', '-')} is required here")
    return loader(path)


# -- verbs -----------------------------------------------------------------

def cmd_pi(args) -> int:
    if args.joint:
        mu = dist.size_biased_in_marginal(dist.load_joint(args.joint))
    else:
        mu = _need(args, "pmf", dist.load_pmf)
    q = _q(args)
    value = dist.survival_probability(mu, q)
    if args.format == "json":
        _emit(args, json.dumps({"q": q, "pi": value}) + "\n")
    else:
        _emit(args, g10(value) + "\n")
    return EXIT_OK


def cmd_gamma(args) -> int:
    value = dist.gamma(args.eta, _need(args, "pmf", dist.load_pmf))
    if args.format == "json":
        _emit(args, json.dumps({"eta": args.eta, "gamma": value}) + "\n")
    else:
        _emit(args, g10(value) + "\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    q = _q(args)
    if args.model == "rbn1":
        if args.r is None:
            raise PreconditionError("rbn1 needs --r")
        r_eff = float(args.r)
    elif args.model == "rbn2":
        r_eff = _need(args, "pmf", dist.load_pmf).mean
    elif args.model == "rbn3":
        r_eff = _need(args, "pmf", dist.load_pmf).mean
    else:
        joint = _need(args, "joint", dist.load_joint)
        r_eff = joint.mean_io / joint.mean_in
    c = dist.classify(q, r_eff)
    if args.format == "json":
        _emit(args, json.dumps({"product": c.parameter_product, "regime": c.regime.value}) + "\n")
    else:
        _emit(args, f"product,regime\n{g10(c.parameter_product)},{c.regime.value}\n")
    return EXIT_OK


def cmd_gen(args) -> int:
    g, _ = _graph(args)
    _emit(args, format_edge_list(g))
    return EXIT_OK


def _trace_out(args, trace, g, model, q) -> int:
    trace.meta.update(seed=args.seed, q=q, model=model, graph_sha256=graph_digest(g))
    if args.meta:
        Path(args.meta).write_text(trace.metadata_json() + "\n")
    if args.format == "json":
        body = json.loads(trace.metadata_json())
        body["occupied_count"] = trace.counts.tolist()
        _emit(args, json.dumps(body, sort_keys=True) + "\n")
    else:
        _emit(args, trace.to_csv())
    return EXIT_OK


def _parse_nodes(text: str, n: int):
    if text == "full":
        return np.ones(n, dtype=bool)
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_simulate(args) -> int:
    g, model = _graph(args)
    q = _q(args)
    coins = CoinStream(derive_seed(args.seed, SEED_COINS), TAG_FORWARD)
    trace = run_tcp(g, q, _parse_nodes(args.start, g.n), args.t_max, coins)
    return _trace_out(args, trace, g, model, q)


def cmd_dual(args) -> int:
    g, model = _graph(args)
    q = _q(args)
    coins = CoinStream(derive_seed(args.seed, SEED_COINS), TAG_DUAL)
    trace = run_dual(reverse(g), q, args.x0, args.t_max, coins)
    trace.meta["x0"] = args.x0
    return _trace_out(args, trace, g, model, q)


def cmd_attractor(args) -> int:
    g, _ = _graph(args)
    if args.p is None:
        raise PreconditionError("attractor needs the expression bias --p")
    oracle = BooleanFunctionOracle(derive_seed(args.seed, SEED_ORACLE), args.p)
    if args.init == "zeros":
        state0 = np.zeros(g.n, dtype=np.uint8)
    elif args.init == "ones":
        state0 = np.ones(g.n, dtype=np.uint8)
    else:
        state0 = np.random.default_rng(derive_seed(args.seed, SEED_STATE)).integers(0, 2, g.n).astype(np.uint8)
    res = find_attractor(g, oracle, state0, args.t_max)
    if args.trajectory:
        ones, zeta = trajectory(g, oracle, state0, args.t_max)
        Path(args.trajectory).write_text(format_trajectory_csv(ones, zeta))
    row = [res.transient_length, res.cycle_length, int(res.censored)]
    _emit(args, _table(args, ["transient_length", "cycle_length", "censored"], [row]))
    return EXIT_OK


def cmd_verify_duality(args) -> int:
    rng = np.random.default_rng(derive_seed(args.seed, SEED_SUITE))
    qs = tuple(float(v) for v in args.qs.split(","))
    rows = exact_oracle.duality_suite(args.n, args.instances, rng, qs=qs, t_max=args.t_max,
                                      cap=args.cap)
    _emit(args, _table(args, ["instance", "n", "q", "t", "lhs", "rhs", "diff"],
                       [list(r) for r in rows]))
    bad = [r for r in rows if not r.diff < args.tol]
    if bad:
        log.error("%d of %d instances differ by >= %g", len(bad), len(rows), args.tol)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_sweep(args) -> int:
    configs = sweep.load_config(args.config)
    csv_parts, summaries = [], []
    for k, cfg in enumerate(configs):
        if args.override_seed:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        res = sweep.run_sweep(cfg, workers=args.workers)
        text = res.to_csv()
        csv_parts.append(text if k == 0 else text.split("\n", 1)[1])
        summaries.append(json.loads(res.summary_json()))
    if args.format == "json":
        _emit(args, json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    else:
        _emit(args, "".join(csv_parts))
    if args.summary:
        Path(args.summary).write_text(json.dumps(summaries, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rbnsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("pi", parents=[common], help="branching-process survival probability")
    p.add_argument("--pmf", help="offspring pmf file")
    p.add_argument("--joint", help="joint pmf file; uses the size-biased in-degree law")
    _add_q(p)
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("gamma", parents=[common], help="integrated upper quantile of a pmf")
    p.add_argument("--pmf", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("classify", parents=[common], help="order/critical/chaotic regime",
                       description="CSV columns: product,regime")
    p.add_argument("--model", choices=sweep.MODELS, default="rbn2")
    p.add_argument("--r", type=int)
    p.add_argument("--pmf")
    p.add_argument("--joint")
    _add_q(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("gen", parents=[common], help="write an edge list",
                       description="Output: header 'n=<count>', then 'src dst' lines sorted by src, dst.")
    _add_graph_source(p)
    p.set_defaults(func=cmd_gen)

    for verb, func, extra in (("simulate", cmd_simulate, "--start"), ("dual", cmd_dual, "--x0")):
        p = sub.add_parser(verb, parents=[common],
                           help=f"{'threshold contact process' if verb == 'simulate' else 'dual process'} trace",
                           description="CSV columns: t,occupied_count,density")
        _add_graph_source(p)
        _add_q(p)
        p.add_argument("--t-max", type=int, default=100)
        p.add_argument("--meta", help="write run metadata JSON here")
        if extra == "--start":
            p.add_argument("--start", default="full", help="'full' or comma-separated node ids")
        else:
            p.add_argument("--x0", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("attractor", parents=[common], help="transient and cycle length of a Boolean network",
                       description="CSV columns: transient_length,cycle_length,censored. "
                                   "--trajectory writes t,density_ones,zeta_density.")
    _add_graph_source(p, default_model="rbn1")
    p.add_argument("--p", type=float)
    p.add_argument("--t-max", type=int, default=1000)
    p.add_argument("--init", choices=("random", "zeros", "ones"), default="random")
    p.add_argument("--trajectory", help="write the trajectory CSV here")
    p.set_defaults(func=cmd_attractor)

    p = sub.add_parser("verify-duality", parents=[common], help="exact duality check on random instances",
                       description="CSV columns: instance,n,q,t,lhs,rhs,diff")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--qs", default="0.2,0.35,0.5")
    p.add_argument("--t-max", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--cap", type=int, default=exact_oracle.DEFAULT_CAP)
    p.set_defaults(func=cmd_verify_duality)

    p = sub.add_parser("sweep", parents=[common], help="run an experiment config file",
                       description="CSV: one row per replica; --summary writes per-(n,q) JSON.")
    p.add_argument("--config", required=True)
    p.add_argument("--summary", help="write the JSON summary here")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--override-seed", action="store_true", help="use --seed instead of each section's seed")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PreconditionError as exc:
        log.error("%s", exc)
        return EXIT_PRECONDITION
    except GenerationError as exc:
        log.error("%s (degree retries %d, matching retries %d)", exc,
                  exc.degree_retries, exc.matching_retries)
        return EXIT_GENERATION
    except OracleCapError as exc:
        log.error("%s", exc)
        return EXIT_CAP
    except ConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
