"""Multi-source datasets with block-wise missingness and pattern partitions.

An observation consists of L source blocks; each block is observed entirely
or missing entirely.  Rows are partitioned by their missingness pattern (the
binary mask over sources), and all downstream machinery works on that
partition.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AllMissingRowError,
    EmptyAfterFilterError,
    GroupVanishedError,
    NonNumericValueError,
    PartialBlockError,
    SchemaMismatchError,
)

__all__ = [
    "SourceSchema",
    "MultiSourceDataset",
    "PatternPartition",
    "ingest",
    "load_schema",
    "dataset_from_arrays",
    "partition",
    "filter_patterns",
    "validation_report",
]

_MISSING_TOKENS = {"", "na", "nan"}


@dataclass(frozen=True)
class SourceSchema:
    """Ordered source layout: names and the CSV columns backing each source."""

    names: tuple[str, ...]
    columns: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise SchemaMismatchError("schema must declare at least one source")
        if len(self.names) != len(set(self.names)):
            raise SchemaMismatchError("source names must be unique")
        if len(self.columns) != len(self.names):
            raise SchemaMismatchError("one column list required per source")
        flat = [c for cols in self.columns for c in cols]
        if not flat or any(len(cols) < 1 for cols in self.columns):
            raise SchemaMismatchError("every source needs at least one column")
        if len(flat) != len(set(flat)):
            raise SchemaMismatchError("column names must be unique across sources")

    @property
    def n_sources(self) -> int:
        return len(self.names)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(cols) for cols in self.columns)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def column_slices(self) -> tuple[slice, ...]:
        """Half-open column ranges of each source in the stacked value matrix."""
        out, start = [], 0
        for d in self.dims:
            out.append(slice(start, start + d))
            start += d
        return tuple(out)


@dataclass(frozen=True)
class MultiSourceDataset:
    """Validated observations: stacked values with NaN marking missing blocks.

    Attributes
    ----------
    schema : SourceSchema
    values : ndarray, shape (N, d)
        Sources concatenated in schema order; missing blocks are NaN-filled.
    is_y : ndarray of bool, shape (N,)
        Group indicator (False = X, True = Y).
    masks : ndarray of bool, shape (N, L)
        Per-row source observation masks.
    """

    schema: SourceSchema
    values: np.ndarray
    is_y: np.ndarray
    masks: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_x(self) -> int:
        return int(np.sum(~self.is_y))

    @property
    def n_y(self) -> int:
        return int(np.sum(self.is_y))


@dataclass(frozen=True)
class PatternPartition:
    """Rows grouped by exact mask equality, in first-appearance order.

    ``members`` holds row indices into the originating dataset; after
    :func:`filter_patterns` the union of members no longer covers every row
    and ``dropped_rows`` records the difference.
    """

    masks: np.ndarray                      # (n_patterns, L) bool
    row_pattern: np.ndarray                # (N,) int, -1 for dropped rows
    members: tuple[np.ndarray, ...]        # row indices per pattern
    m_counts: tuple[int, ...]              # X rows per pattern
    n_counts: tuple[int, ...]              # Y rows per pattern
    valid_pairs: tuple[tuple[int, int], ...]
    dropped_rows: tuple[int, ...] = field(default=())

    @property
    def n_patterns(self) -> int:
        return len(self.members)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(mem) for mem in self.members)

    def pattern_summary(self) -> list[dict]:
        """Per-pattern counts in reporting order (JSON-ready)."""
        return [
            {
                "mask": [int(v) for v in self.masks[a]],
                "m": self.m_counts[a],
                "n": self.n_counts[a],
            }
            for a in range(self.n_patterns)
        ]


def load_schema(schema_path: str | Path) -> SourceSchema:
    """Parse the sidecar JSON ``{"sources": [{"name":..., "columns": [...]}]}``."""
    try:
        raw = json.loads(Path(schema_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaMismatchError(f"cannot read schema sidecar: {exc}") from exc
    sources = raw.get("sources") if isinstance(raw, dict) else None
    if not isinstance(sources, list) or not sources:
        raise SchemaMismatchError('schema sidecar must contain a non-empty "sources" list')
    names, columns = [], []
    for entry in sources:
        if not isinstance(entry, dict) or "name" not in entry or "columns" not in entry:
            raise SchemaMismatchError('each source needs "name" and "columns"')
        names.append(str(entry["name"]))
        cols = entry["columns"]
        if not isinstance(cols, list):
            raise SchemaMismatchError('"columns" must be a list of column names')
        columns.append(tuple(str(c) for c in cols))
    return SourceSchema(names=tuple(names), columns=tuple(columns))


def _parse_cell(token: str, row_idx: int, col: str) -> float:
    text = token.strip()
    if text.lower() in _MISSING_TOKENS:
        return np.nan
    try:
        value = float(text)
    except ValueError:
        raise NonNumericValueError(
            f"row {row_idx}, column {col!r}: cannot parse {token!r} as a number"
        ) from None
    if not np.isfinite(value):
        raise NonNumericValueError(
            f"row {row_idx}, column {col!r}: non-finite value {token!r}"
        )
    return value


def _validate_blocks(values: np.ndarray, schema: SourceSchema, row_labels=None) -> np.ndarray:
    """Check the all-or-none block rule; return the (N, L) observation masks."""
    n_rows = values.shape[0]
    masks = np.zeros((n_rows, schema.n_sources), dtype=bool)
    for l, sl in enumerate(schema.column_slices):
        block_nan = np.isnan(values[:, sl])
        any_missing = block_nan.any(axis=1)
        all_missing = block_nan.all(axis=1)
        partial = any_missing & ~all_missing
        if partial.any():
            i = int(np.flatnonzero(partial)[0])
            label = row_labels[i] if row_labels is not None else i
            raise PartialBlockError(
                f"row {label}: source {schema.names[l]!r} is partially missing; "
                "blocks must be entirely present or entirely absent"
            )
        masks[:, l] = ~all_missing
    empty = ~masks.any(axis=1)
    if empty.any():
        i = int(np.flatnonzero(empty)[0])
        label = row_labels[i] if row_labels is not None else i
        raise AllMissingRowError(f"row {label}: every source is missing")
    return masks


def _parse_group(token: str, row_idx: int) -> bool:
    text = token.strip()
    if text == "X":
        return False
    if text == "Y":
        return True
    raise NonNumericValueError(
        f"row {row_idx}: group label must be 'X' or 'Y', got {token!r}"
    )


def ingest(csv_path: str | Path, schema_path: str | Path) -> MultiSourceDataset:
    """Read a delimited file plus its schema sidecar into a validated dataset.

    The CSV needs a ``group`` column (values X/Y) and exactly the columns the
    sidecar assigns to sources; missing entries are written as an empty cell,
    ``NA``, or ``NaN``.

    Raises
    ------
    SchemaMismatchError, PartialBlockError, AllMissingRowError,
    NonNumericValueError, GroupVanishedError
    """
    schema = load_schema(schema_path)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError("CSV file is empty") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    expected = ["group"] + [c for cols in schema.columns for c in cols]
    if sorted(header) != sorted(expected):
        missing = set(expected) - set(header)
        extra = set(header) - set(expected)
        raise SchemaMismatchError(
            f"CSV columns do not match the schema sidecar "
            f"(missing: {sorted(missing)}, unexpected: {sorted(extra)})"
        )
    col_pos = {name: header.index(name) for name in header}

    n_rows = len(rows)
    d = schema.total_dim
    values = np.empty((n_rows, d), dtype=np.float64)
    is_y = np.empty(n_rows, dtype=bool)
    flat_cols = [c for cols in schema.columns for c in cols]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaMismatchError(
                f"row {i}: expected {len(header)} cells, found {len(row)}"
            )
        is_y[i] = _parse_group(row[col_pos["group"]], i)
        for j, col in enumerate(flat_cols):
            values[i, j] = _parse_cell(row[col_pos[col]], i, col)

    masks = _validate_blocks(values, schema)
    data = MultiSourceDataset(schema=schema, values=values, is_y=is_y, masks=masks)
    if data.n_x == 0 or data.n_y == 0:
        raise GroupVanishedError(
            f"need at least one row per group, got m={data.n_x}, n={data.n_y}"
        )
    return data


def dataset_from_arrays(
    values,
    groups,
    source_boundaries,
    source_names=None,
) -> MultiSourceDataset:
    """Build a dataset from an in-memory matrix with NaN markers.

    Parameters
    ----------
    values : array-like, shape (N, d)
    groups : sequence of 'X'/'Y' labels (or booleans, True = Y)
    source_boundaries : list of (start, stop)
        Half-open column ranges, in order, covering all d columns.
    source_names : optional list of names, default s1..sL
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise SchemaMismatchError("values must be a non-empty 2-D matrix")
    n_rows, d = arr.shape

    bounds = [(int(a), int(b)) for a, b in source_boundaries]
    cursor = 0
    for start, stop in bounds:
        if start != cursor or stop <= start:
            raise SchemaMismatchError(
                f"source boundaries must tile the columns in order; "
                f"got ({start}, {stop}) at offset {cursor}"
            )
        cursor = stop
    if cursor != d:
        raise SchemaMismatchError(
            f"source boundaries cover {cursor} columns but the matrix has {d}"
        )
    if source_names is None:
        source_names = [f"s{l + 1}" for l in range(len(bounds))]
    columns = tuple(
        tuple(f"c{j + 1}" for j in range(start, stop)) for start, stop in bounds
    )
    schema = SourceSchema(names=tuple(source_names), columns=columns)

    group_arr = np.asarray(groups)
    if group_arr.shape != (n_rows,):
        raise SchemaMismatchError("groups must have one label per row")
    if group_arr.dtype == bool:
        is_y = group_arr.copy()
    else:
        is_y = np.array([_parse_group(str(g), i) for i, g in enumerate(group_arr)])

    bad = np.isinf(arr)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NonNumericValueError(f"row {i}, column {j}: non-finite value")

    masks = _validate_blocks(arr, schema)
    data = MultiSourceDataset(schema=schema, values=arr, is_y=is_y, masks=masks)
    if data.n_x == 0 or data.n_y == 0:
        raise GroupVanishedError(
            f"need at least one row per group, got m={data.n_x}, n={data.n_y}"
        )
    return data


def partition(data: MultiSourceDataset) -> PatternPartition:
    """Group rows by missingness pattern, in order of first appearance."""
    order: dict[tuple, int] = {}
    row_pattern = np.empty(data.n_rows, dtype=np.int64)
    for i in range(data.n_rows):
        key = tuple(bool(v) for v in data.masks[i])
        if key not in order:
            order[key] = len(order)
        row_pattern[i] = order[key]

    n_pat = len(order)
    masks = np.zeros((n_pat, data.schema.n_sources), dtype=bool)
    for key, a in order.items():
        masks[a] = key
    members = tuple(np.flatnonzero(row_pattern == a) for a in range(n_pat))
    m_counts = tuple(int(np.sum(~data.is_y[mem])) for mem in members)
    n_counts = tuple(int(np.sum(data.is_y[mem])) for mem in members)
    pairs = _overlapping_pairs(masks)
    return PatternPartition(
        masks=masks,
        row_pattern=row_pattern,
        members=members,
        m_counts=m_counts,
        n_counts=n_counts,
        valid_pairs=pairs,
    )


def _overlapping_pairs(masks: np.ndarray) -> tuple[tuple[int, int], ...]:
    n_pat = masks.shape[0]
    return tuple(
        (a, b)
        for a in range(n_pat)
        for b in range(a, n_pat)
        if np.any(masks[a] & masks[b])
    )


def filter_patterns(
    part: PatternPartition, n_thres: int = 2, p_thres: float = 0.1
) -> PatternPartition:
    """Drop unstable patterns: min{m_α, n_α} < n_thres or N_α < p_thres · max N_β.

    Returns a new partition over the survivors (first-appearance order kept,
    pattern ids renumbered) with the dropped row indices recorded.

    Raises
    ------
    EmptyAfterFilterError, GroupVanishedError
    """
    if n_thres < 0 or not 0 <= p_thres < 1:
        raise ValueError("need n_thres >= 0 and 0 <= p_thres < 1")
    sizes = part.sizes
    size_floor = p_thres * max(sizes)
    keep = [
        a
        for a in range(part.n_patterns)
        if min(part.m_counts[a], part.n_counts[a]) >= n_thres
        and sizes[a] >= size_floor
    ]
    if not keep:
        raise EmptyAfterFilterError(
            f"no pattern survives filtering (n_thres={n_thres}, p_thres={p_thres})"
        )
    if len(keep) == part.n_patterns and not part.dropped_rows:
        return part

    dropped = sorted(
        int(i)
        for a in range(part.n_patterns)
        if a not in keep
        for i in part.members[a]
    )
    remap = {a: new for new, a in enumerate(keep)}
    row_pattern = np.full_like(part.row_pattern, -1)
    for a, new in remap.items():
        row_pattern[part.members[a]] = new
    members = tuple(part.members[a] for a in keep)
    m_counts = tuple(part.m_counts[a] for a in keep)
    n_counts = tuple(part.n_counts[a] for a in keep)
    if sum(m_counts) == 0 or sum(n_counts) == 0:
        raise GroupVanishedError("filtering removed every row of one group")
    masks = part.masks[keep]
    return PatternPartition(
        masks=masks,
        row_pattern=row_pattern,
        members=members,
        m_counts=m_counts,
        n_counts=n_counts,
        valid_pairs=_overlapping_pairs(masks),
        dropped_rows=tuple(dropped) + part.dropped_rows,
    )


def validation_report(
    raw: PatternPartition, filtered: PatternPartition
) -> dict:
    """JSON-ready ingest/filter summary: per-pattern counts and dropped rows."""
    return {
        "n_patterns_raw": raw.n_patterns,
        "n_patterns": filtered.n_patterns,
        "patterns": filtered.pattern_summary(),
        "valid_pairs": [list(p) for p in filtered.valid_pairs],
        "dropped_rows": list(filtered.dropped_rows),
    }
