"""Config-driven experiment runs.

One spec describes a dataset, a preprocessing choice, and a learner; running
it leaves a canonical graph file plus a JSON report in the output directory.
A matrix is just a list of specs executed independently, summarized as one
delimiter-separated row per spec.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .constraint import pc_stable
from .data import (
    CategoricalDataset,
    DataError,
    DiscretizationSpec,
    discretize_kmeans,
    discretize_quartiles,
    impute_missing,
    load_dataset,
)
from .graph_io import parse_graph_file, write_graph_file
from .graphs import (
    Dag,
    MixedGraph,
    dag_to_cpdag,
    degree_stats,
    disjoint_subgraph_count,
    pdag_to_dag_extension,
)
from .metrics import compare_graphs
from .scores import (
    SearchConfig,
    bic,
    free_parameters,
    hill_climb,
    log_likelihood,
    tabu_search,
)

REPORT_VERSION = 1
WORKERS_ENV = "BNLAB_WORKERS"

ALGORITHMS = ("hc", "tabu", "pc-stable")
DISCRETIZATIONS = ("quartile", "kmeans", "none")
IMPUTATIONS = ("mode", "parent-conditional", "none")

SUMMARY_COLUMNS = (
    "name",
    "status",
    "algorithm",
    "discretization",
    "imputation",
    "seed",
    "edges",
    "subgraphs",
    "free_params",
    "log_likelihood",
    "bic",
    "shd",
    "f1",
    "bsf",
)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


_SAFE_NAME = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-")


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one run; file paths stay as given."""

    name: str
    data_path: str
    schema_path: str
    algorithm: str
    discretization: str = "none"
    imputation: str = "none"
    seed: int = 0
    output_dir: str = "runs"
    alpha: float = 0.05
    max_condition: int = 3
    max_parents: int | None = None
    reference_path: str | None = None

    def __post_init__(self):
        if not self.name or not set(self.name) <= _SAFE_NAME:
            raise ConfigError(f"experiment name {self.name!r} is not filesystem-safe")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.discretization not in DISCRETIZATIONS:
            raise ConfigError(f"unknown discretization {self.discretization!r}")
        if self.imputation not in IMPUTATIONS:
            raise ConfigError(f"unknown imputation {self.imputation!r}")
        if self.imputation == "parent-conditional" and not self.reference_path:
            raise ConfigError(
                "parent-conditional imputation needs a reference graph"
            )
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.max_condition < 0:
            raise ConfigError("max_condition must be non-negative")
        if self.max_parents is not None and self.max_parents < 1:
            raise ConfigError("max_parents must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "data_path": self.data_path,
            "schema_path": self.schema_path,
            "algorithm": self.algorithm,
            "discretization": self.discretization,
            "imputation": self.imputation,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "alpha": self.alpha,
            "max_condition": self.max_condition,
            "max_parents": self.max_parents,
            "reference_path": self.reference_path,
        }


@dataclass(frozen=True)
class RunReport:
    """Outcome of one run; numeric fields are None exactly when unavailable."""

    version: int
    spec: dict
    status: str  # "ok" | "failed"
    failed_stage: str | None
    error: str | None
    graph_path: str | None
    stats: dict | None
    log_likelihood: float | None
    bic: float | None
    metrics: dict | None
    wall_clock_s: float | None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> str:
        # wall clock is the one field that varies between identical runs;
        # persisted bytes must be reproducible from (spec, seed)
        payload = {
            "version": self.version,
            "spec": self.spec,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "graph_path": self.graph_path,
            "stats": self.stats,
            "log_likelihood": self.log_likelihood,
            "bic": self.bic,
            "metrics": self.metrics,
        }
        return json.dumps(_finite(payload), indent=2, sort_keys=True) + "\n"


def _finite(x):
    """Replace non-finite floats with None so reports stay valid JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


# report/graph writes may race between matrix workers sharing a directory
_lock_registry: dict[str, threading.Lock] = {}
_registry_guard = threading.Lock()


def _dir_lock(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _registry_guard:
        return _lock_registry.setdefault(key, threading.Lock())


def _discretize_columns(columns, method: str):
    if method == "none":
        leftover = [c.name for c in columns if c.kind == "continuous"]
        if leftover:
            raise DataError(
                f"continuous columns {leftover} need a discretization method"
            )
        return list(columns)
    spec = DiscretizationSpec(method)
    fn = discretize_quartiles if method == "quartile" else discretize_kmeans
    return [fn(c, spec) if c.kind == "continuous" else c for c in columns]


def learn_graph(
    data: CategoricalDataset,
    algorithm: str,
    *,
    alpha: float = 0.05,
    max_condition: int = 3,
    seed: int = 0,
    max_parents: int | None = None,
) -> tuple[MixedGraph, Dag | None]:
    """Run one learner; returns (graph to persist, DAG to score).

    Score-based searches persist the equivalence class of the DAG they found;
    pc-stable output is already a PDAG and scoring needs an extension later.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    if algorithm == "pc-stable":
        pdag, _ = pc_stable(data, alpha=alpha, max_condition=max_condition)
        return pdag, None
    cfg = SearchConfig(seed=seed, max_parents=max_parents)
    search = hill_climb if algorithm == "hc" else tabu_search
    dag = search(data, cfg)
    return dag_to_cpdag(dag), dag


def _learn(spec: ExperimentSpec, data: CategoricalDataset):
    return learn_graph(
        data,
        spec.algorithm,
        alpha=spec.alpha,
        max_condition=spec.max_condition,
        seed=spec.seed,
        max_parents=spec.max_parents,
    )


def run_experiment(spec: ExperimentSpec) -> RunReport:
    """Execute load -> discretize -> impute -> learn -> persist -> score ->
    report; any failure raises StageError naming the stage."""
    t0 = time.perf_counter()
    with _stage("load"):
        columns = load_dataset(spec.data_path, spec.schema_path)
        reference = (
            parse_graph_file(spec.reference_path) if spec.reference_path else None
        )
    with _stage("discretize"):
        dataset = CategoricalDataset(_discretize_columns(columns, spec.discretization))
    with _stage("impute"):
        if spec.imputation != "none":
            dataset = impute_missing(
                dataset,
                strategy=spec.imputation,
                graph=reference if spec.imputation == "parent-conditional" else None,
            )
        dataset.require_complete()
    with _stage("learn"):
        learnt, scored_dag = _learn(spec, dataset)
    out_dir = Path(spec.output_dir)
    graph_path = out_dir / f"{spec.name}.graph"
    with _stage("persist"):
        out_dir.mkdir(parents=True, exist_ok=True)
        with _dir_lock(out_dir):
            write_graph_file(learnt, graph_path)
    with _stage("score"):
        if scored_dag is None:
            scored_dag = pdag_to_dag_extension(learnt)
        arities = {c.name: len(c.states) for c in dataset.columns}
        deg = degree_stats(learnt)
        stats = {
            "nodes": learnt.node_count,
            "edges": learnt.edge_count,
            "subgraphs": disjoint_subgraph_count(learnt),
            "max_in_degree": deg.max_in_degree,
            "max_degree": deg.max_degree,
            "free_parameters": free_parameters(scored_dag, arities),
        }
        ll = log_likelihood(scored_dag, dataset)
        b = bic(scored_dag, dataset)
        metrics = (
            compare_graphs(reference, learnt).as_dict() if reference is not None else None
        )
    report = RunReport(
        version=REPORT_VERSION,
        spec=spec.as_dict(),
        status="ok",
        failed_stage=None,
        error=None,
        graph_path=str(graph_path),
        stats=stats,
        log_likelihood=ll,
        bic=b,
        metrics=metrics,
        wall_clock_s=time.perf_counter() - t0,
    )
    with _stage("report"):
        with _dir_lock(out_dir):
            Path(out_dir / f"{spec.name}.report.json").write_text(report.to_json())
    return report


def _failed_report(spec: ExperimentSpec, err: StageError, elapsed: float) -> RunReport:
    report = RunReport(
        version=REPORT_VERSION,
        spec=spec.as_dict(),
        status="failed",
        failed_stage=err.stage,
        error=str(err.cause),
        graph_path=None,
        stats=None,
        log_likelihood=None,
        bic=None,
        metrics=None,
        wall_clock_s=elapsed,
    )
    try:
        out_dir = Path(spec.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with _dir_lock(out_dir):
            Path(out_dir / f"{spec.name}.report.json").write_text(report.to_json())
    except OSError:
        pass  # the failure itself may be an unwritable directory
    return report


def _run_recorded(spec: ExperimentSpec) -> RunReport:
    t0 = time.perf_counter()
    try:
        return run_experiment(spec)
    except StageError as err:
        return _failed_report(spec, err, time.perf_counter() - t0)


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, explicit)
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")


def run_matrix(
    specs: Sequence[ExperimentSpec], workers: int | None = None
) -> tuple[list[RunReport], str]:
    """Run every spec, failures included, and build the summary table."""
    if not specs:
        raise ConfigError("matrix needs at least one experiment")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate experiment names in matrix")
    n = worker_count(workers)
    if n == 1 or len(specs) == 1:
        reports = [_run_recorded(s) for s in specs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            reports = list(pool.map(_run_recorded, specs))
    return reports, summary_table(reports)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if not math.isfinite(value) else format(value, ".6f")
    return str(value)


def summary_table(reports: Sequence[RunReport]) -> str:
    """One row per run; numeric cells empty when the run failed."""
    lines = ["\t".join(SUMMARY_COLUMNS)]
    for r in reports:
        stats = r.stats or {}
        metrics = r.metrics or {}
        row = {
            "name": r.spec["name"],
            "status": "ok" if r.ok else f"failed:{r.failed_stage}",
            "algorithm": r.spec["algorithm"],
            "discretization": r.spec["discretization"],
            "imputation": r.spec["imputation"],
            "seed": r.spec["seed"],
            "edges": stats.get("edges"),
            "subgraphs": stats.get("subgraphs"),
            "free_params": stats.get("free_parameters"),
            "log_likelihood": r.log_likelihood,
            "bic": r.bic,
            "shd": metrics.get("shd"),
            "f1": metrics.get("f1"),
            "bsf": metrics.get("bsf"),
        }
        lines.append("\t".join(_cell(row[c]) for c in SUMMARY_COLUMNS))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Config files: one INI section per experiment, DEFAULT applies to all.
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "data",
    "schema",
    "algorithm",
    "discretization",
    "imputation",
    "seed",
    "output_dir",
    "reference",
    "alpha",
    "max_condition",
    "max_parents",
}


def _typed(section, key, caster, default):
    raw = section.get(key, None)
    if raw is None or raw == "":
        return default
    try:
        return caster(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a {caster.__name__}")


def parse_experiment_config(path: str | Path) -> list[ExperimentSpec]:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    if not parser.sections():
        raise ConfigError(f"config {path} defines no experiments")
    specs = []
    for name in parser.sections():
        section = parser[name]
        unknown = sorted(set(section.keys()) - _CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
        for required in ("data", "schema", "algorithm"):
            if not section.get(required):
                raise ConfigError(f"[{name}] missing required key {required!r}")
        specs.append(
            ExperimentSpec(
                name=name,
                data_path=section["data"],
                schema_path=section["schema"],
                algorithm=section["algorithm"],
                discretization=section.get("discretization", "none"),
                imputation=section.get("imputation", "none"),
                seed=_typed(section, "seed", int, 0),
                output_dir=section.get("output_dir", "runs"),
                alpha=_typed(section, "alpha", float, 0.05),
                max_condition=_typed(section, "max_condition", int, 3),
                max_parents=_typed(section, "max_parents", int, None),
                reference_path=section.get("reference", None) or None,
            )
        )
    return specs
