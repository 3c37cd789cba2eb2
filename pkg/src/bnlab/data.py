"""Tabular data: loading, discretization, ordinal encoding, imputation.

Columns are either continuous (float values) or categorical with an ordered
state list; categorical cells are stored as state indices.  Missing cells are
None in columns and -1 in the packed code matrix.  The on-disk form is
delimiter-separated text with a header row plus a sidecar schema file; the
missing-value token is ``?``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .graphs import MixedGraph

MISSING_TOKEN = "?"


class DataError(ValueError):
    pass


class SchemaError(DataError):
    pass


class DegenerateColumn(DataError):
    """Too few distinct values to form intervals."""


class TooFewDistinctValues(DataError):
    """Fewer distinct values than requested clusters."""


class SingleState(DataError):
    """Ordinal encoding needs at least two states."""


class AllMissingColumn(DataError):
    """A column with no observed values cannot be imputed."""


@dataclass(frozen=True)
class Column:
    """One variable: continuous floats or indices into an ordered state list."""

    name: str
    kind: str  # "continuous" | "categorical"
    values: tuple
    states: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise SchemaError(f"unknown column kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.states:
                raise SchemaError(f"categorical column {self.name!r} needs states")
            if len(set(self.states)) != len(self.states):
                raise SchemaError(f"duplicate states in column {self.name!r}")
            for v in self.values:
                if v is not None and not (0 <= v < len(self.states)):
                    raise DataError(
                        f"state index {v} out of range in column {self.name!r}"
                    )
        else:
            if self.states is not None:
                raise SchemaError("continuous columns take no states")
            for v in self.values:
                if v is not None and not np.isfinite(v):
                    raise DataError(f"non-finite value in column {self.name!r}")

    @property
    def missing_count(self) -> int:
        return sum(1 for v in self.values if v is None)

    def non_missing(self) -> list:
        return [v for v in self.values if v is not None]


@dataclass(frozen=True)
class DiscretizationSpec:
    method: str = "quartile"  # "quartile" | "kmeans"
    k: int = 4
    state_labels: tuple[str, ...] = ("Very_Low", "Low", "High", "Very_High")

    def __post_init__(self):
        if self.method not in ("quartile", "kmeans"):
            raise SchemaError(f"unknown discretization method {self.method!r}")
        if self.k < 2:
            raise SchemaError("k must be at least 2")
        if len(self.state_labels) != self.k:
            raise SchemaError("state_labels count must equal k")


class CategoricalDataset:
    """A complete-or-partially-missing table of categorical columns."""

    def __init__(self, columns: Sequence[Column]):
        columns = tuple(columns)
        if not columns:
            raise DataError("dataset needs at least one column")
        for c in columns:
            if c.kind != "categorical":
                raise DataError(f"column {c.name!r} is not categorical")
        lengths = {len(c.values) for c in columns}
        if len(lengths) != 1:
            raise DataError("columns differ in length")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        self.columns = columns
        self.names = tuple(names)
        self._by_name = {c.name: c for c in columns}
        n = lengths.pop()
        codes = np.full((n, len(columns)), -1, dtype=np.int64)
        for j, c in enumerate(columns):
            for i, v in enumerate(c.values):
                if v is not None:
                    codes[i, j] = v
        self.codes = codes
        self.codes.setflags(write=False)

    @property
    def row_count(self) -> int:
        return self.codes.shape[0]

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(len(c.states) for c in self.columns)

    @property
    def is_complete(self) -> bool:
        return bool((self.codes >= 0).all())

    def column(self, name: str) -> Column:
        return self._by_name[name]

    def states_of(self, name: str) -> tuple[str, ...]:
        return self._by_name[name].states

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def rows(self) -> Iterator[tuple[int, ...]]:
        for row in self.codes:
            yield tuple(int(v) for v in row)

    def select(self, names: Sequence[str]) -> "CategoricalDataset":
        return CategoricalDataset([self._by_name[n] for n in names])

    def take_rows(self, idx: np.ndarray) -> "CategoricalDataset":
        cols = []
        for j, c in enumerate(self.columns):
            vals = tuple(
                None if self.codes[i, j] < 0 else int(self.codes[i, j]) for i in idx
            )
            cols.append(Column(c.name, "categorical", vals, c.states))
        return CategoricalDataset(cols)

    def require_complete(self) -> None:
        if not self.is_complete:
            missing = [
                c.name for c in self.columns if any(v is None for v in c.values)
            ]
            raise DataError(f"dataset has missing values in columns {missing}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoricalDataset):
            return NotImplemented
        return self.columns == other.columns

    def __repr__(self) -> str:
        return f"CategoricalDataset({self.row_count} rows, {len(self.columns)} columns)"


# ---------------------------------------------------------------------------
# Discretization and encoding.
# ---------------------------------------------------------------------------

def discretize_quartiles(c: Column, spec: DiscretizationSpec | None = None) -> Column:
    """Rank-based interval discretization into k roughly equal groups.

    A value's state is floor(k * rank / n) clamped to k-1, where rank counts
    strictly smaller non-missing values, so ties fall into the lower interval.
    """
    spec = spec or DiscretizationSpec("quartile")
    if c.kind != "continuous":
        raise DataError(f"column {c.name!r} is not continuous")
    observed = np.asarray(c.non_missing(), dtype=float)
    if len(np.unique(observed)) < 2:
        raise DegenerateColumn(f"column {c.name!r} has fewer than 2 distinct values")
    n = observed.size
    sorted_vals = np.sort(observed)
    out = []
    for v in c.values:
        if v is None:
            out.append(None)
            continue
        rank = int(np.searchsorted(sorted_vals, v, side="left"))
        out.append(min(spec.k * rank // n, spec.k - 1))
    return Column(c.name, "categorical", tuple(out), spec.state_labels)


def _kmeans_1d(xs: np.ndarray, k: int, tol: float = 1e-9, max_iter: int = 300):
    """Deterministic 1-D Lloyd iteration.

    Centroids start at the (2i+1)/(2k) quantiles; an empty cluster keeps its
    previous centroid.  Returns centroids in ascending order plus labels.
    """
    quantiles = [(2 * i + 1) / (2 * k) for i in range(k)]
    centroids = np.quantile(xs, quantiles)
    for _ in range(max_iter):
        dist = np.abs(xs[:, None] - centroids[None, :])
        assign = dist.argmin(axis=1)
        new = centroids.copy()
        for j in range(k):
            members = xs[assign == j]
            if members.size:
                new[j] = members.mean()
        if np.max(np.abs(new - centroids)) <= tol:
            centroids = new
            break
        centroids = new
    order = np.argsort(centroids, kind="stable")
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    dist = np.abs(xs[:, None] - centroids[None, :])
    assign = relabel[dist.argmin(axis=1)]
    return centroids[order], assign


def discretize_kmeans(c: Column, spec: DiscretizationSpec | None = None) -> Column:
    """1-D k-means clustering; states labelled in ascending centroid order."""
    spec = spec or DiscretizationSpec("kmeans")
    if c.kind != "continuous":
        raise DataError(f"column {c.name!r} is not continuous")
    observed = np.asarray(c.non_missing(), dtype=float)
    if len(np.unique(observed)) < spec.k:
        raise TooFewDistinctValues(
            f"column {c.name!r} has fewer than {spec.k} distinct values"
        )
    _, assign = _kmeans_1d(observed, spec.k)
    it = iter(assign)
    out = tuple(None if v is None else int(next(it)) for v in c.values)
    return Column(c.name, "categorical", out, spec.state_labels)


def encode_ordinal_to_unit(c: Column) -> Column:
    """State i of s maps onto i/(s-1); endpoints land on 0 and 1 exactly."""
    if c.kind != "categorical":
        raise DataError(f"column {c.name!r} is not categorical")
    s = len(c.states)
    if s < 2:
        raise SingleState(f"column {c.name!r} has a single state")
    vals = tuple(None if v is None else v / (s - 1) for v in c.values)
    return Column(c.name, "continuous", vals)


# ---------------------------------------------------------------------------
# Imputation.
# ---------------------------------------------------------------------------

def _column_mode(codes: np.ndarray, arity: int) -> int:
    observed = codes[codes >= 0]
    if observed.size == 0:
        raise AllMissingColumn("column has no observed values")
    # bincount + argmax: ties resolve to the lowest state index
    return int(np.bincount(observed, minlength=arity).argmax())


def impute_missing(
    d: CategoricalDataset,
    strategy: str = "mode",
    graph: MixedGraph | None = None,
) -> CategoricalDataset:
    """Fill missing cells by column mode or by mode conditional on the cell's
    parent values in ``graph`` (falling back to column mode when the parent
    configuration is unseen or itself incomplete)."""
    if strategy not in ("mode", "parent-conditional"):
        raise DataError(f"unknown imputation strategy {strategy!r}")
    if strategy == "parent-conditional" and graph is None:
        raise DataError("parent-conditional imputation needs a graph")
    if d.is_complete:
        return d
    codes = d.codes
    new_cols = []
    for j, c in enumerate(d.columns):
        col = codes[:, j]
        if (col >= 0).all():
            new_cols.append(c)
            continue
        arity = len(c.states)
        fallback = _column_mode(col, arity)
        parent_idx: list[int] = []
        if strategy == "parent-conditional":
            parent_idx = [
                d.index_of(p) for p in graph.parents(c.name) if p in d.names
            ]
        filled = list(c.values)
        for i in range(d.row_count):
            if col[i] >= 0:
                continue
            choice = fallback
            if parent_idx:
                cfg = codes[i, parent_idx]
                if (cfg >= 0).all():
                    mask = (col >= 0) & (codes[:, parent_idx] == cfg).all(axis=1)
                    if mask.any():
                        choice = int(
                            np.bincount(col[mask], minlength=arity).argmax()
                        )
            filled[i] = choice
        new_cols.append(Column(c.name, "categorical", tuple(filled), c.states))
    return CategoricalDataset(new_cols)


# ---------------------------------------------------------------------------
# File formats: data table plus sidecar schema.
# ---------------------------------------------------------------------------

def read_schema(path: str | Path) -> list[tuple[str, str, tuple[str, ...] | None]]:
    """Schema rows (name, kind, states); states are ``|``-joined for
    categorical columns and empty for continuous ones."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["name", "kind", "states"]:
            raise SchemaError(f"schema {path}: expected header name,kind,states")
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            if len(row) != 3:
                raise SchemaError(f"schema {path}: malformed row {row!r}")
            name, kind, states_text = (cell.strip() for cell in row)
            if kind == "continuous":
                if states_text:
                    raise SchemaError(f"schema {path}: continuous {name!r} lists states")
                out.append((name, "continuous", None))
            elif kind in ("categorical", "categorical-ordered"):
                states = tuple(s.strip() for s in states_text.split("|") if s.strip())
                if not states:
                    raise SchemaError(f"schema {path}: categorical {name!r} has no states")
                out.append((name, "categorical", states))
            else:
                raise SchemaError(f"schema {path}: unknown kind {kind!r}")
    if not out:
        raise SchemaError(f"schema {path}: no columns")
    return out


def write_schema(columns: Sequence[Column], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "kind", "states"])
        for c in columns:
            states = "|".join(c.states) if c.kind == "categorical" else ""
            writer.writerow([c.name, c.kind, states])


def read_table(
    data_path: str | Path,
    schema: Sequence[tuple[str, str, tuple[str, ...] | None]],
) -> list[Column]:
    """Read a delimited table against a schema; cells equal to '?' are missing."""
    by_name = {name: (kind, states) for name, kind, states in schema}
    with open(data_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{data_path}: empty file")
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in by_name]
        if unknown:
            raise SchemaError(f"{data_path}: columns missing from schema: {unknown}")
        raw: list[list[str]] = [[] for _ in header]
        for line_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{data_path} line {line_no}: expected {len(header)} cells"
                )
            for cell, bucket in zip(row, raw):
                bucket.append(cell.strip())
    columns = []
    for name, cells in zip(header, raw):
        kind, states = by_name[name]
        if kind == "continuous":
            vals = tuple(
                None if cell == MISSING_TOKEN else float(cell) for cell in cells
            )
            columns.append(Column(name, "continuous", vals))
        else:
            index = {s: i for i, s in enumerate(states)}
            vals = []
            for cell in cells:
                if cell == MISSING_TOKEN:
                    vals.append(None)
                elif cell in index:
                    vals.append(index[cell])
                else:
                    raise DataError(
                        f"{data_path}: value {cell!r} not a state of {name!r}"
                    )
            columns.append(Column(name, "categorical", tuple(vals), states))
    return columns


def load_dataset(data_path: str | Path, schema_path: str | Path) -> list[Column]:
    return read_table(data_path, read_schema(schema_path))


def write_table(columns: Sequence[Column], path: str | Path) -> None:
    lengths = {len(c.values) for c in columns}
    if len(lengths) != 1:
        raise DataError("columns differ in length")
    n = lengths.pop()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in columns])
        for i in range(n):
            row = []
            for c in columns:
                v = c.values[i]
                if v is None:
                    row.append(MISSING_TOKEN)
                elif c.kind == "categorical":
                    row.append(c.states[v])
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)
