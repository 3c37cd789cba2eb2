"""Generate a demo corpus: ground-truth network, sampled table, run config.

Writes table.csv, schema.csv, true.graph and a ready-to-run matrix.ini into
--out-dir.  Optional flags degrade the table the way field data usually is:
--missing-rate knocks out random cells, --continuous turns the first k
columns into jittered floats so the discretization step has work to do.
"""

from __future__ import annotations

import argparse
import configparser
from pathlib import Path

import numpy as np

from bnlab.data import Column, write_schema, write_table
from bnlab.graph_io import write_graph_file
from bnlab.synthetic import identifiable_random_bn, sample

ALGORITHMS = ("hc", "tabu", "pc-stable")


def degrade(columns, rng, missing_rate: float, n_continuous: int):
    out = []
    for j, c in enumerate(columns):
        values = list(c.values)
        if j < n_continuous:
            # state index plus jitter: monotone in the code, so quantile
            # binning keeps the generating dependence visible
            values = [v + rng.uniform(0.0, 0.999) for v in values]
            c = Column(c.name, "continuous", tuple(values))
        elif missing_rate > 0:
            knocked = rng.random(len(values)) < missing_rate
            values = [None if k else v for v, k in zip(values, knocked)]
            c = Column(c.name, c.kind, tuple(values), c.states)
        out.append(c)
    return out


def run_config(args, paths: dict) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg["DEFAULT"] = {
        "data": str(paths["data"]),
        "schema": str(paths["schema"]),
        "reference": str(paths["graph"]),
        "output_dir": str(paths["runs"]),
        "seed": str(args.seed),
    }
    if args.continuous:
        cfg["DEFAULT"]["discretization"] = "quartile"
    if args.missing_rate > 0:
        cfg["DEFAULT"]["imputation"] = "mode"
    for algo in ALGORITHMS:
        cfg[algo.replace("-", "_")] = {"algorithm": algo}
    return cfg


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="demo")
    ap.add_argument("--nodes", type=int, default=5)
    ap.add_argument("--arity", type=int, default=3)
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--missing-rate", type=float, default=0.0)
    ap.add_argument("--continuous", type=int, default=0, metavar="K",
                    help="emit the first K columns as jittered floats")
    args = ap.parse_args(argv)

    if not 2 <= args.nodes <= 26:
        ap.error("--nodes must be between 2 and 26")
    labels = tuple(chr(ord("A") + i) for i in range(args.nodes))
    rng = np.random.default_rng(args.seed)
    bn = identifiable_random_bn(
        labels, {x: args.arity for x in labels}, rng,
        edge_prob=0.5, min_edges=args.nodes - 2, max_tries=5000,
    )
    columns = degrade(
        sample(bn, args.rows, rng).columns, rng, args.missing_rate, args.continuous
    )

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "data": out / "table.csv",
        "schema": out / "schema.csv",
        "graph": out / "true.graph",
        "runs": out / "runs",
    }
    write_table(columns, paths["data"])
    write_schema(columns, paths["schema"])
    write_graph_file(bn.graph, paths["graph"])
    with open(out / "matrix.ini", "w") as fh:
        run_config(args, paths).write(fh)

    print(f"wrote {args.rows} rows over {args.nodes} nodes to {out}/")
    print(f"true graph: {sorted(bn.graph.directed_pairs())}")
    print(f"next: bnlab matrix --config {out / 'matrix.ini'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
