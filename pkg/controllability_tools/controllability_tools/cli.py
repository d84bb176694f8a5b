"""
matctl: generation, input selection, verification and experiments.

Results go to stdout (or --out) as JSON; logs go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from controllability_tools import __version__
from controllability_tools.auxgraph import add_input_edges, build_base_graph, to_dot
from controllability_tools.config import load_settings
from controllability_tools.constraints import ControllabilityModel, certify
from controllability_tools.errors import (
    ConfigError,
    GenerationError,
    KTooSmall,
    NoCommonBasis,
    NoIndependentMatching,
    NotStronglyConnected,
    UnsolvableSystem,
)
from controllability_tools.experiments import (
    ExperimentSpec,
    degree_order,
    random_order,
    run_experiment,
    smallest_certified_prefix,
    write_outputs,
)
from controllability_tools.metrics import METRICS, MetricConfig, WeightedGraph, as_objective
from controllability_tools.selection import (
    min_input_set,
    min_input_set_strong,
    select_joint,
    select_joint_modular,
    select_tradeoff,
)
from controllability_tools.sysmodel import (
    DescriptorSystem,
    Graph,
    consensus_system,
    double_integrator_system,
    free_parameter_system,
    random_geometric_network,
    symmetrize,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CERTIFICATE = 1
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_UNSOLVABLE = 4
EXIT_INFEASIBLE_K = 5

CONSTRUCTORS = {
    "consensus": consensus_system,
    "double": double_integrator_system,
    "free": free_parameter_system,
}


class CertificateFailed(Exception):
    pass


def _config_hash(args):
    skip = {"func", "out", "log_level"}
    data = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return hashlib.sha1(json.dumps(data, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:12]


def _emit(payload, args):
    payload = {**payload, "meta": {"seed": args.seed, "config_hash": _config_hash(args), "version": __version__}}
    if args.format == "csv":
        text = pd.json_normalize(payload, max_level=1).to_csv(index=False)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _build_system(graph, kind):
    if kind == "consensus" and not graph.undirected:
        graph = symmetrize(graph, "mutual")
    return CONSTRUCTORS[kind](graph)


def load_system(path, kind=None):
    """
    Reads a system file written by ``gen``, a bare system, or a bare graph.

    A graph is turned into a system with ``kind`` (default "free").
    """
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if "system" in data:
        return DescriptorSystem.from_json(data["system"])
    if "F" in data:
        return DescriptorSystem.from_json(data)
    graph = Graph.from_json(data["graph"] if "graph" in data else data)
    return _build_system(graph, kind or "free")


def _parse_ints(text):
    text = text.strip()
    if not text:
        return []
    return [int(v) for v in text.split(",")]


def _read_inputs(args):
    if args.S is not None:
        return _parse_ints(args.S)
    with open(args.inputs, encoding="utf-8") as handle:
        data = json.load(handle)
    return [int(s) for s in (data["S"] if isinstance(data, dict) else data)]


def _metric_graph(system, args):
    graph = system.graph if system.graph is not None else system.network_graph()
    return WeightedGraph.random(graph, args.weight_seed if args.weight_seed is not None else args.seed)


def _objective(system, args):
    weighted = _metric_graph(system, args)
    cfg = MetricConfig(t=args.t, p=args.p, x_star=args.x_star, seed=args.seed)
    objective = as_objective(args.metric, weighted, cfg)
    if objective.ground_size != len(system.inputs):
        raise ValueError(
            f"Metric is defined on {objective.ground_size} nodes but the system has {len(system.inputs)} candidates"
        )
    return objective


def cmd_generate(args, settings):
    directed = random_geometric_network(args.n, args.degree, range_max=args.range_max, seed=args.seed)
    graph = symmetrize(directed, args.symmetrize) if args.kind == "consensus" else directed
    payload = {"graph": graph.to_json(), "mean_degree": directed.mean_out_degree(), "kind": args.kind}
    if args.kind != "graph":
        payload["system"] = CONSTRUCTORS[args.kind](graph).to_json()
    logger.info("Generated %d nodes with mean out-degree %.3f", args.n, directed.mean_out_degree())
    print(f"mean degree {directed.mean_out_degree():.3f}", file=sys.stderr)
    _emit(payload, args)


def cmd_min_inputs(args, settings):
    system = load_system(args.system, args.kind)
    cfg = settings.field_config(args.seed)
    if args.baseline:
        if args.baseline == "degree":
            order = degree_order(system.graph if system.graph is not None else system.network_graph())
        else:
            order = random_order(len(system.inputs), args.seed)
        order = [p for p in order if p < len(system.inputs)]
        result = smallest_certified_prefix(system, order, cfg)
        if result is None:
            raise UnsolvableSystem("Even the full candidate set fails the certificate")
        result.algorithm = f"baseline_{args.baseline}"
    elif args.assume_strong:
        result = min_input_set_strong(system, cfg)
    else:
        result = min_input_set(system, cfg)
    _emit(result.to_json(), args)


def cmd_select(args, settings):
    system = load_system(args.system, args.kind)
    cfg = settings.field_config(args.seed)
    model = ControllabilityModel(system, cfg)
    if args.modular_weights:
        weights = [float(w) for w in args.modular_weights.split(",")]
        result = select_joint_modular(system, weights, args.k, cfg, model, strong=args.strong)
    else:
        result = select_joint(
            system,
            _objective(system, args),
            args.k,
            cfg,
            model,
            strong=args.strong,
            samples=args.samples,
            seed=args.seed,
            delta=args.delta,
        )
    _emit(result.to_json(), args)


def cmd_tradeoff(args, settings):
    system = load_system(args.system, args.kind)
    cfg = settings.field_config(args.seed)
    result = select_tradeoff(system, _objective(system, args), args.eta, args.k, cfg, strong=args.strong)
    _emit(result.to_json(), args)


def cmd_verify(args, settings):
    system = load_system(args.system, args.kind)
    S = _read_inputs(args)
    z_count = settings.z_count if args.z_count is None else args.z_count
    certificate = certify(system, S, settings.field_config(args.seed), z_count)
    if args.dot:
        cfg = settings.field_config(args.seed)
        Path(args.dot).write_text(to_dot(add_input_edges(build_base_graph(system, cfg), S)), encoding="utf-8")
    _emit({"certificate": certificate.to_json()}, args)
    if not certificate.passed:
        raise CertificateFailed()


def cmd_experiment(args, settings):
    overrides = {"trials": args.trials, "seed": args.seed, "workers": args.workers, "out_dir": args.out_dir}
    if args.n_values:
        overrides["n_values"] = tuple(_parse_ints(args.n_values))
    if args.k_values:
        overrides["k_values"] = tuple(_parse_ints(args.k_values))
    overrides = {k: v for k, v in overrides.items() if v is not None}
    spec = getattr(ExperimentSpec, args.experiment)(**overrides)
    df_results = run_experiment(spec)
    paths = write_outputs(spec, df_results)
    _emit({"experiment": spec.experiment, "paths": {k: str(v) for k, v in paths.items()}}, args)


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: MATCTL_SEED)")
    parser.add_argument("--out", default=None, help="Output file (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--log-level", default=None)


def _add_system(parser):
    parser.add_argument("--system", required=True, help="System, graph or gen output file")
    parser.add_argument("--kind", choices=tuple(CONSTRUCTORS), default=None, help="Constructor for bare graphs")


def _add_metric(parser):
    parser.add_argument("--metric", choices=METRICS, default="convergence")
    parser.add_argument("--t", type=float, default=1.0)
    parser.add_argument("--p", type=float, default=2.0)
    parser.add_argument("--x-star", type=float, default=0.0)
    parser.add_argument("--weight-seed", type=int, default=None)


def _positive_n(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("a network needs at least 2 nodes")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="matctl", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a random geometric network")
    _add_common(gen)
    gen.add_argument("--n", type=_positive_n, required=True)
    gen.add_argument("--degree", type=float, default=3.0)
    gen.add_argument("--range-max", type=float, default=600.0)
    gen.add_argument("--kind", choices=("graph",) + tuple(CONSTRUCTORS), default="graph")
    gen.add_argument("--symmetrize", choices=("mutual", "union"), default="mutual")
    gen.set_defaults(func=cmd_generate)

    mins = sub.add_parser("min-inputs", help="Minimum input set")
    _add_common(mins)
    _add_system(mins)
    mins.add_argument("--assume-strong", action="store_true")
    mins.add_argument("--baseline", choices=("degree", "random"), default=None)
    mins.set_defaults(func=cmd_min_inputs)

    select = sub.add_parser("select", help="Joint performance and controllability selection")
    _add_common(select)
    _add_system(select)
    _add_metric(select)
    select.add_argument("--k", type=int, required=True)
    select.add_argument("--modular-weights", default=None, help="Comma separated weights")
    select.add_argument("--strong", action="store_true")
    select.add_argument("--delta", type=float, default=None)
    select.add_argument("--samples", type=int, default=None)
    select.set_defaults(func=cmd_select)

    tradeoff = sub.add_parser("tradeoff", help="Greedy performance and controllability-index trade-off")
    _add_common(tradeoff)
    _add_system(tradeoff)
    _add_metric(tradeoff)
    tradeoff.add_argument("--k", type=int, required=True)
    tradeoff.add_argument("--eta", type=float, required=True)
    tradeoff.add_argument("--strong", action="store_true")
    tradeoff.set_defaults(func=cmd_tradeoff)

    verify = sub.add_parser("verify", help="Controllability certificate for an input set")
    _add_common(verify)
    _add_system(verify)
    group = verify.add_mutually_exclusive_group(required=True)
    group.add_argument("--inputs", help="JSON list or selection result with an S field")
    group.add_argument("--S", help="Comma separated input states")
    verify.add_argument("--z-count", type=int, default=None)
    verify.add_argument("--dot", default=None, help="Also write the auxiliary graph as DOT")
    verify.set_defaults(func=cmd_verify)

    experiment = sub.add_parser("experiment", help="Reproduce the experiment figures")
    _add_common(experiment)
    experiment.add_argument("experiment", choices=("fig1", "fig2", "scaling"))
    experiment.add_argument("--trials", type=int, default=None)
    experiment.add_argument("--workers", type=int, default=None)
    experiment.add_argument("--n-values", default=None)
    experiment.add_argument("--k-values", default=None)
    experiment.add_argument("--out-dir", default="results")
    experiment.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings()
    except ConfigError as exc:
        print(f"matctl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    level = (args.log_level or settings.log_level).upper()
    if level not in logging.getLevelNamesMapping():
        print(f"matctl: unknown log level {level!r}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, stream=sys.stderr)
    if args.seed is None:
        args.seed = settings.seed
    try:
        args.func(args, settings)
    except CertificateFailed:
        return EXIT_CERTIFICATE
    except GenerationError as exc:
        print(f"matctl: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (UnsolvableSystem, NoIndependentMatching, NotStronglyConnected, NoCommonBasis) as exc:
        print(f"matctl: {exc}", file=sys.stderr)
        return EXIT_UNSOLVABLE
    except KTooSmall as exc:
        print(f"matctl: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE_K
    except (ValueError, OSError, KeyError) as exc:
        print(f"matctl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
