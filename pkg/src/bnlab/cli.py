"""Command-line front end.

Every subcommand reads schema-described tabular data and/or graph files and
emits either a canonical graph file or a JSON document on stdout, so runs can
be chained from shell scripts.  Exit codes: 0 success, 1 any failed run,
2 invalid configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .averaging import (
    AverageConfig,
    average_graphs,
    consensus_annotations,
    default_theta,
    tally_edges,
)
from .bn import (
    cross_validate,
    do_intervene,
    effect_score,
    fit_cpts,
    marginal,
    sensitivity,
)
from .data import (
    CategoricalDataset,
    DataError,
    DiscretizationSpec,
    discretize_kmeans,
    discretize_quartiles,
    impute_missing,
    load_dataset,
    write_schema,
    write_table,
)
from .experiments import (
    ConfigError,
    StageError,
    _finite,
    learn_graph,
    parse_experiment_config,
    run_matrix,
)
from .graph_io import parse_graph_file, write_graph_file
from .graphs import (
    Dag,
    degree_stats,
    disjoint_subgraph_count,
    pdag_to_dag_extension,
)
from .metrics import compare_graphs
from .scores import free_parameters


def _emit(payload) -> None:
    print(json.dumps(_finite(payload), indent=2, sort_keys=True))


def _load_table(data_path: str, schema_path: str) -> CategoricalDataset:
    columns = load_dataset(data_path, schema_path)
    continuous = [c.name for c in columns if c.kind == "continuous"]
    if continuous:
        raise DataError(
            f"columns {continuous} are continuous; run `discretize` first"
        )
    return CategoricalDataset(columns)


def _load_dag(path: str) -> Dag:
    # a purely directed file passes through unchanged; PDAGs get a
    # consistent extension so they can be parameterized
    return pdag_to_dag_extension(parse_graph_file(path))


def _fit(args) -> tuple:
    data = _load_table(args.data, args.schema)
    data.require_complete()
    dag = _load_dag(args.graph)
    return fit_cpts(dag, data, alpha_smooth=args.alpha_smooth), data


def _default_labels(k: int) -> tuple[str, ...]:
    if k == 4:
        return DiscretizationSpec().state_labels
    return tuple(f"Level_{i}" for i in range(k))


def _cmd_discretize(args) -> int:
    labels = (
        tuple(args.labels.split(",")) if args.labels else _default_labels(args.k)
    )
    spec = DiscretizationSpec(args.method, k=args.k, state_labels=labels)
    fn = discretize_quartiles if args.method == "quartile" else discretize_kmeans
    columns = [
        fn(c, spec) if c.kind == "continuous" else c
        for c in load_dataset(args.data, args.schema)
    ]
    write_table(columns, args.out)
    write_schema(columns, args.out_schema)
    return 0


def _cmd_impute(args) -> int:
    if args.strategy == "parent-conditional" and not args.graph:
        raise ConfigError("parent-conditional imputation needs --graph")
    data = _load_table(args.data, args.schema)
    graph = (
        parse_graph_file(args.graph)
        if args.strategy == "parent-conditional"
        else None
    )
    filled = impute_missing(data, strategy=args.strategy, graph=graph)
    write_table(filled.columns, args.out)
    return 0


def _cmd_learn(args) -> int:
    data = _load_table(args.data, args.schema)
    data.require_complete()
    graph, _ = learn_graph(
        data,
        args.algo,
        alpha=args.alpha,
        max_condition=args.max_condition,
        seed=args.seed,
        max_parents=args.max_parents,
    )
    write_graph_file(graph, args.out)
    return 0


def _collect_graph_paths(raw: list[str]) -> list[Path]:
    paths: list[Path] = []
    for entry in raw:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.graph")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("no graph files found")
    return paths


def _cmd_average(args) -> int:
    graphs = [parse_graph_file(p) for p in _collect_graph_paths(args.graphs)]
    theta = args.theta or default_theta(len(graphs), use_table=args.theta_table)
    consensus = average_graphs(graphs, AverageConfig(theta=theta))
    notes = consensus_annotations(tally_edges(graphs), consensus)
    write_graph_file(consensus, args.out, annotations=notes)
    _emit(
        {
            "graphs": len(graphs),
            "theta": theta,
            "edges": consensus.edge_count,
            "out": str(args.out),
        }
    )
    return 0


def _cmd_evaluate(args) -> int:
    learnt = parse_graph_file(args.graph)
    reference = parse_graph_file(args.reference)
    data = _load_table(args.data, args.schema)
    report = compare_graphs(reference, learnt)
    arities = {c.name: len(c.states) for c in data.columns}
    row = report.as_dict()
    row.update(
        edges=learnt.edge_count,
        free_params=free_parameters(pdag_to_dag_extension(learnt), arities),
        subgraphs=disjoint_subgraph_count(learnt),
        max_in_degree=degree_stats(learnt).max_in_degree,
    )
    _emit(row)
    return 0


def _parse_evidence(pairs: list[str]) -> dict[str, str]:
    evidence = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"evidence {pair!r} is not NODE=STATE")
        node, state = pair.split("=", 1)
        evidence[node] = state
    return evidence


def _cmd_infer(args) -> int:
    bn, data = _fit(args)
    evidence = _parse_evidence(args.evidence)
    dist = marginal(bn, args.target, evidence or None)
    _emit(
        {
            "target": args.target,
            "evidence": evidence,
            "states": list(data.states_of(args.target)),
            "probabilities": [float(p) for p in dist],
        }
    )
    return 0


def _cmd_intervene(args) -> int:
    bn, data = _fit(args)
    weights = (
        [float(w) for w in args.weights.split(",")] if args.weights else None
    )
    last = bn.cardinality(args.do) - 1
    lo = marginal(do_intervene(bn, args.do, 0), args.target)
    hi = marginal(do_intervene(bn, args.do, last), args.target)
    _emit(
        {
            "do": args.do,
            "target": args.target,
            "low_state": data.states_of(args.do)[0],
            "high_state": data.states_of(args.do)[last],
            "low_marginal": [float(p) for p in lo],
            "high_marginal": [float(p) for p in hi],
            "effect": effect_score(lo, hi, weights),
        }
    )
    return 0


def _cmd_sensitivity(args) -> int:
    bn, _ = _fit(args)
    scores = sensitivity(bn, args.target, epsilon=args.epsilon)
    _emit({"target": args.target, "epsilon": args.epsilon, "scores": scores})
    return 0


def _cmd_cv(args) -> int:
    data = _load_table(args.data, args.schema)
    data.require_complete()
    dag = _load_dag(args.graph)
    result = cross_validate(
        dag, data, k=args.k, seed=args.seed, alpha_smooth=args.alpha_smooth
    )
    _emit(
        {
            "k": args.k,
            "seed": args.seed,
            "mean_accuracy": result.mean_accuracy,
            "per_node": result.per_node,
            "fold_sizes": list(result.fold_sizes),
        }
    )
    return 0


def _cmd_matrix(args) -> int:
    specs = parse_experiment_config(args.config)
    reports, summary = run_matrix(specs, workers=args.workers)
    if args.summary:
        Path(args.summary).write_text(summary)
    sys.stdout.write(summary)
    failed = [r for r in reports if not r.ok]
    for r in failed:
        print(
            f"{r.spec['name']}: failed at stage {r.failed_stage!r}: {r.error}",
            file=sys.stderr,
        )
    return 1 if failed else 0


def _add_data_args(p) -> None:
    p.add_argument("--data", required=True, help="delimited data table")
    p.add_argument("--schema", required=True, help="sidecar schema file")


def _add_fit_args(p) -> None:
    _add_data_args(p)
    p.add_argument("--graph", required=True, help="graph file to parameterize")
    p.add_argument("--alpha-smooth", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnlab",
        description="Structure learning, averaging, and inference for "
        "discrete Bayesian networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="map continuous columns onto intervals")
    _add_data_args(p)
    p.add_argument("--method", choices=("quartile", "kmeans"), default="quartile")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--labels", help="comma-separated state labels (k of them)")
    p.add_argument("--out", required=True)
    p.add_argument("--out-schema", required=True)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("impute", help="fill missing categorical cells")
    _add_data_args(p)
    p.add_argument("--strategy", choices=("mode", "parent-conditional"), default="mode")
    p.add_argument("--graph", help="graph for parent-conditional imputation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("learn", help="learn a structure from complete data")
    _add_data_args(p)
    p.add_argument("--algo", choices=("hc", "tabu", "pc-stable"), required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-condition", type=int, default=3)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("average", help="vote-threshold consensus of graph files")
    p.add_argument("--graphs", nargs="+", required=True, help="graph files or a directory")
    thresh = p.add_mutually_exclusive_group()
    thresh.add_argument("--theta", type=int, help="minimum votes per edge")
    thresh.add_argument(
        "--theta-table",
        action="store_true",
        help="use the published per-count threshold table instead of ceil(n/3)",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_average)

    p = sub.add_parser("evaluate", help="compare a learnt graph against a reference")
    p.add_argument("--graph", required=True, help="learnt graph file")
    p.add_argument("--reference", required=True, help="reference graph file")
    _add_data_args(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("infer", help="posterior marginal given evidence")
    _add_fit_args(p)
    p.add_argument("--target", required=True)
    p.add_argument(
        "--evidence",
        action="append",
        default=[],
        metavar="NODE=STATE",
        help="repeatable",
    )
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("intervene", help="forced-state effect on a target")
    _add_fit_args(p)
    p.add_argument("--do", required=True, help="node forced to its extreme states")
    p.add_argument("--target", required=True)
    p.add_argument("--weights", help="comma-separated ordinal weights")
    p.set_defaults(func=_cmd_intervene)

    p = sub.add_parser("sensitivity", help="CPT-perturbation influence on a target")
    _add_fit_args(p)
    p.add_argument("--target", required=True)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("cv", help="k-fold node prediction accuracy")
    _add_fit_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("matrix", help="run a config-driven experiment matrix")
    p.add_argument("--config", required=True, help="INI file, one section per run")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--summary", help="also write the summary table here")
    p.set_defaults(func=_cmd_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        if isinstance(exc, StageError):
            print(f"error: {exc}", file=sys.stderr)
        else:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
