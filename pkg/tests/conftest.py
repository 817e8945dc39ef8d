"""Shared builders for randomized test instances.

Tests construct datasets from (mask, m, n) pattern specs: every row of a
pattern draws Gaussian values on its observed sources and NaN elsewhere.
Seeds are fixed inside each test so failures reproduce exactly.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from brise.datamodel import MultiSourceDataset, dataset_from_arrays


def make_dataset(rng, specs, d_per=2, shift=0.0) -> MultiSourceDataset:
    """Dataset from pattern specs [(mask, m, n), ...].

    Each source spans ``d_per`` columns; ``shift`` moves the Y rows to make
    alternatives. Rows arrive pattern-by-pattern, X rows first.
    """
    n_sources = len(specs[0][0])
    bounds = [(l * d_per, (l + 1) * d_per) for l in range(n_sources)]
    values, is_y = [], []
    for mask, m, n in specs:
        for i in range(m + n):
            row = rng.normal(size=n_sources * d_per)
            if i >= m:
                row = row + shift
            for l in range(n_sources):
                if not mask[l]:
                    row[l * d_per : (l + 1) * d_per] = np.nan
            values.append(row)
            is_y.append(i >= m)
    return dataset_from_arrays(np.array(values), np.array(is_y), bounds)


def random_specs(rng, n_patterns=None, lo=4, hi=8):
    """Random overlapping pattern layout with every group size >= 2.

    The first source is always observed so every pattern pair overlaps and
    no filtering ever removes the instance under default thresholds.
    """
    if n_patterns is None:
        n_patterns = int(rng.integers(1, 4))
    candidates = [
        (True, bool(b1), bool(b2)) for b1 in range(2) for b2 in range(2)
    ]
    picks = rng.choice(len(candidates), size=n_patterns, replace=False)
    specs = []
    for idx in picks:
        total = int(rng.integers(lo, hi + 1))
        m = int(rng.integers(2, total - 1))
        specs.append((candidates[idx], m, total - m))
    return specs


def rebuild(data: MultiSourceDataset, values=None, is_y=None) -> MultiSourceDataset:
    """Clone a dataset with replaced values or labels (same schema)."""
    bounds = [(sl.start, sl.stop) for sl in data.schema.column_slices]
    return dataset_from_arrays(
        data.values if values is None else values,
        data.is_y if is_y is None else is_y,
        bounds,
        source_names=data.schema.names,
    )


def pinned_instance():
    """Two patterns of four rows each, 2 X + 2 Y, integer-valued, k=2.

    Small enough that every null moment is verifiable by exhaustive
    enumeration (36 label assignments) and the oracle outputs are clean
    rationals worth freezing in tests.
    """
    from brise.datamodel import partition
    from brise.pipeline import prepare

    vals = np.array(
        [
            [0.0, 1.0],
            [2.0, 5.0],
            [4.0, 2.0],
            [7.0, 3.0],
            [1.0, np.nan],
            [6.0, np.nan],
            [3.0, np.nan],
            [9.0, np.nan],
        ]
    )
    is_y = np.array([False, False, True, True, False, False, True, True])
    data = dataset_from_arrays(vals, is_y, [(0, 1), (1, 2)])
    return data, prepare(data, partition(data), k=2)


def group_counts(prep):
    """Per-pattern (m, n) counts of an arranged, prepared instance."""
    arr = prep.arrangement
    m = tuple(
        int((~arr.is_y[arr.offsets[a] : arr.offsets[a + 1]]).sum())
        for a in range(len(arr.sizes))
    )
    n = tuple(
        int(arr.is_y[arr.offsets[a] : arr.offsets[a + 1]].sum())
        for a in range(len(arr.sizes))
    )
    return m, n


def write_instance(tmp_path, data: MultiSourceDataset, stem="data"):
    """Serialize a dataset as the CSV + schema sidecar the CLI consumes."""
    flat_cols = [c for cols in data.schema.columns for c in cols]
    csv_path = tmp_path / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group"] + flat_cols)
        for row, y in zip(data.values, data.is_y):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow(["Y" if y else "X"] + cells)
    schema_path = tmp_path / f"{stem}.schema.json"
    schema_path.write_text(
        json.dumps(
            {
                "sources": [
                    {"name": name, "columns": list(cols)}
                    for name, cols in zip(data.schema.names, data.schema.columns)
                ]
            }
        )
    )
    return csv_path, schema_path
