"""
Command-line entry point: generate, coreset, estimate, solve, stream, experiment, verify
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from app import __version__
from app.config import configure_logging, settings
from app.errors import ConfigError, GraphFormatError, SublinearError
from app.models import (
    EstimateMode,
    ExperimentConfig,
    KeepRule,
    Pipeline,
    Problem,
    SamplerBackend,
    SolverKind,
    StreamOrder,
)
from app.services.estimate import est_cc, est_maxcut, gamma_coreset, gamma_original
from app.services.experiment import experiment_service
from app.services.graph import (
    SignedGraph,
    as_graph,
    gen_planted_cc,
    gen_random_graph,
    measure_delta,
    to_stream,
)
from app.services.graph_io import (
    read_edge_list,
    read_graph_or_coreset,
    read_stream,
    write_coreset,
    write_edge_list,
    write_estimate,
    write_solution,
    write_stream,
    write_stream_report,
)
from app.services.pipeline import problem_of, solve_value
from app.services.sampling import CoresetGraph, build_coreset, importance_params
from app.services.solvers import (
    cc_exact,
    cc_local_search,
    maxcut_exact,
    maxcut_local_search,
    solution_record,
)
from app.services.streaming import two_pass_run
from app.services.verification import verification_service

logger = logging.getLogger("app.cli")

GENERATE_STREAM_SALT = 3


def _seed(args) -> int:
    """The --seed value, or a fresh one; printed either way so the run can be replayed"""
    seed = args.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy) & 0xFFFFFFFF
    print(f"seed {seed}")
    logger.info("using seed %d", seed)
    return seed


def _emit_json(text: str, out: Optional[str], writer, payload) -> None:
    if out:
        writer(payload, out)
        print(f"wrote {out}")
    else:
        print(text)


# Commands
def cmd_generate(args) -> int:
    seed = _seed(args)
    if args.kind == "planted-cc":
        g = gen_planted_cc(args.n, args.k, args.noise, seed)
    else:
        g = gen_random_graph(args.n, args.delta_exp, seed)
    write_edge_list(g, args.out)
    print(f"wrote {args.out}: n={g.n} m={g.m} avg_degree={g.avg_degree:.6g}")
    if args.stream_out:
        stream = to_stream(g, args.order, seed ^ GENERATE_STREAM_SALT)
        write_stream(stream, args.stream_out)
        print(f"wrote {args.stream_out}: {len(stream)} events ({args.order.value})")
    return 0


def cmd_coreset(args) -> int:
    seed = _seed(args)
    g = read_edge_list(args.input)
    params = importance_params(g, args.epsilon, args.c_const)
    coreset = build_coreset(g, params, seed, edge_sampling=args.edge_sampling)
    write_coreset(coreset, args.out)
    print(f"wrote {args.out}: |S|={coreset.n} |E'|={coreset.m} W={coreset.total_weight:.6g}")
    return 0


def _default_gamma(view, epsilon: float) -> np.ndarray:
    if isinstance(view, CoresetGraph):
        return gamma_coreset(view, epsilon, view.delta, view.n_original)
    g = as_graph(view)
    if g.n < 2 or g.avg_degree <= 0:
        return np.ones(g.n)
    return gamma_original(g.n, epsilon, g.avg_degree)


def cmd_estimate(args) -> int:
    seed = _seed(args)
    view = read_graph_or_coreset(args.input)
    n = as_graph(view).n
    gamma = np.full(n, args.gamma) if args.gamma is not None else _default_gamma(view, args.epsilon)
    if problem_of(view) == Problem.CC:
        result = est_cc(view, gamma, args.k, seed, mode=args.mode, samples=args.samples)
    else:
        result = est_maxcut(view, gamma, seed, mode=args.mode, samples=args.samples)
    print(f"value {result.value:g}")
    if isinstance(view, CoresetGraph):
        print(f"scaled_value {result.value * view.scale:g}")
    _emit_json(result.model_dump_json(indent=2), args.out, write_estimate, result)
    return 0


def cmd_solve(args) -> int:
    seed = _seed(args)
    view = read_graph_or_coreset(args.input)
    g = as_graph(view)
    if args.solver == SolverKind.EST:
        value = solve_value(view, args.solver, seed, k=args.k, epsilon=args.epsilon)
        record = None
    elif isinstance(g, SignedGraph):
        if args.solver == SolverKind.EXACT:
            labels, value = cc_exact(g, args.k)
        else:
            labels, value = cc_local_search(g, args.k, args.restarts, seed)
        record = solution_record(labels, value, args.solver.value, seed)
    else:
        if args.solver == SolverKind.EXACT:
            side, value = maxcut_exact(g)
        else:
            side, value = maxcut_local_search(g, args.restarts, seed)
        record = solution_record(side, value, args.solver.value, seed)
    print(f"value {value:g}")
    if isinstance(view, CoresetGraph):
        print(f"scaled_value {value * view.scale:g}")
    if record is not None and args.out:
        write_solution(record, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_stream(args) -> int:
    seed = _seed(args)
    if args.graph:
        g = read_edge_list(args.graph)
        stream = to_stream(g, args.order, seed ^ GENERATE_STREAM_SALT)
    else:
        stream = read_stream(args.input, args.n)
    n = stream.n
    delta = args.delta if args.delta is not None else measure_delta(stream, n)
    report = two_pass_run(
        stream, n, delta, args.epsilon, args.solver, seed,
        k=args.k, c_const=args.c_const, restarts=args.restarts,
        backend=args.backend, keep_rule=args.keep_rule, calibrated=not args.raw_scores,
    )
    print(f"value {report.value:g}")
    _emit_json(report.model_dump_json(indent=2), args.out, write_stream_report, report)
    return 0


EXPERIMENT_FLAGS = {
    "problem": "problem",
    "n": "n",
    "delta_exp": "delta_exp",
    "epsilon": "epsilon",
    "c_const": "c_const",
    "trials": "trials",
    "seed": "rng_seed",
    "pipeline": "pipeline",
    "solver": "solver",
    "restarts": "restarts",
    "clusters": "clusters",
    "noise": "noise",
    "stream_order": "stream_order",
    "edge_sampling": "edge_sampling",
    "workers": "workers",
    "out": "output",
}


def experiment_config(args) -> ExperimentConfig:
    """Config file values, then every flag given on the command line on top"""
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise GraphFormatError(f"cannot read config {args.config}: {e}")
        try:
            values = ExperimentConfig.from_text(text).model_dump()
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"invalid config {args.config}: {e}")
    for flag, field in EXPERIMENT_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            values[field] = value
    values.setdefault("workers", settings.workers)
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}")


def cmd_experiment(args) -> int:
    config = experiment_config(args)
    print(f"seed {config.rng_seed}")
    report = experiment_service.run(config)
    if config.output:
        for path in experiment_service.write_report(report, config.output):
            print(f"wrote {path}")
    else:
        print(report.rows_csv(), end="")
    aggregate = report.aggregate
    print(f"mean_ratio {aggregate.mean_ratio:.6g} min_ratio {aggregate.min_ratio:.6g} trials {aggregate.trials}")
    return 0


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    print(f"seed {seed}")
    results = verification_service.run_or_raise(seed, args.only)
    print(json.dumps([r.model_dump() for r in results], indent=2))
    return 0


# Parser
def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (fresh one when omitted)")


def _unit_interval(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sublinear-cut", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("generate", help="write a random or planted-clustering graph")
    p.add_argument("--kind", choices=["random", "planted-cc"], default="random")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta-exp", type=float, default=0.5, help="expected average degree n**delta_exp")
    p.add_argument("--k", type=int, default=2, help="planted clusters")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--stream-out", help="also write the graph as an edge stream")
    p.add_argument("--order", type=StreamOrder, default=StreamOrder.SHUFFLED)
    _add_seed(p)
    p.set_defaults(func=cmd_generate)

    p = commands.add_parser("coreset", help="importance-sampled core-set of a graph")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=_unit_interval, default=settings.default_epsilon)
    p.add_argument("--c-const", type=float, default=None)
    p.add_argument("--no-edge-sampling", dest="edge_sampling", action="store_false")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_coreset)

    p = commands.add_parser("estimate", help="LP-based estimate of the optimum")
    p.add_argument("--input", required=True, help="graph file, or core-set file with its sidecar")
    p.add_argument("--epsilon", type=_unit_interval, default=settings.default_epsilon)
    p.add_argument("--gamma", type=float, default=None, help="uniform seed probability")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", type=EstimateMode, default=EstimateMode.EXHAUSTIVE)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_estimate)

    p = commands.add_parser("solve", help="exact or local-search solution")
    p.add_argument("--input", required=True)
    p.add_argument("--solver", type=SolverKind, default=SolverKind.EXACT)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--epsilon", type=_unit_interval, default=settings.default_epsilon)
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_solve)

    p = commands.add_parser("stream", help="two-pass streaming core-set plus solver")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", help="stream file")
    source.add_argument("--graph", help="graph file, streamed in --order")
    p.add_argument("--n", type=int, default=None, help="vertex count of a stream file without a header")
    p.add_argument("--order", type=StreamOrder, default=StreamOrder.SHUFFLED)
    p.add_argument("--delta", type=float, default=None, help="average degree (measured when omitted)")
    p.add_argument("--epsilon", type=_unit_interval, default=settings.default_epsilon)
    p.add_argument("--c-const", type=float, default=None)
    p.add_argument("--solver", type=SolverKind, default=SolverKind.LOCAL_SEARCH)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--backend", type=SamplerBackend, default=None)
    p.add_argument("--keep-rule", type=KeepRule, default=KeepRule.LOG)
    p.add_argument("--raw-scores", action="store_true", help="weight Pass 2 by scores, not inclusion")
    p.add_argument("--out")
    _add_seed(p)
    p.set_defaults(func=cmd_stream)

    p = commands.add_parser("experiment", help="baseline against core-set pipeline over trials")
    p.add_argument("--config", help="key=value experiment config file")
    p.add_argument("--problem", type=Problem, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta-exp", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--c-const", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--pipeline", type=Pipeline, default=None)
    p.add_argument("--solver", type=SolverKind, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--stream-order", type=StreamOrder, default=None)
    p.add_argument("--edge-sampling", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="JSON report path; CSV rows go next to it")
    _add_seed(p)
    p.set_defaults(func=cmd_experiment)

    p = commands.add_parser("verify", help="run the invariant suites")
    p.add_argument("--only", action="append", help="suite name (repeatable)")
    _add_seed(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)
    try:
        return args.func(args)
    except SublinearError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error("invalid parameters: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return ConfigError.exit_code
    except Exception:
        logger.exception("unexpected failure")
        return 1
