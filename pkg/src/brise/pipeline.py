"""End-to-end orchestration: dataset -> partition -> ranks -> inference.

Everything downstream of the partition runs on a canonical arrangement:
patterns ordered by their observation mask, rows inside a pattern ordered
by their observed values.  Group labels play no part in the ordering.  Two
consequences fall out for free: reordering input rows cannot change any
output bit, and swapping the group labels changes results only through the
label vector itself (which the statistics treat symmetrically).  Rows with
identical observed values are interchangeable everywhere they appear, so
their relative order is irrelevant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import MultiSourceDataset, PatternPartition, filter_patterns, partition
from .errors import InvalidConfigError
from .metrics import BlockDistanceMatrix, SourceMetric, block_distance_matrix
from .moments import BlockMoments, NullMomentSet, compute_block_moments, null_moment_set
from .permutation import SCHEME_PATTERN, SCHEME_STANDARD, permutation_test
from .rankgraph import RankMatrix, assemble_rank_matrix
from .statistics import (
    METHOD_CONGREGATED,
    METHOD_VECTORIZED,
    StatisticEngine,
    TestResult,
    asymptotic_diagnostics,
    chi_square_tail,
)

__all__ = [
    "Arrangement",
    "Prepared",
    "arrange",
    "prepare",
    "run_test",
    "run_test_prepared",
    "run_diagnostics",
    "INFERENCE_ASYMPTOTIC",
    "INFERENCE_PATTERN_PERM",
    "INFERENCE_STANDARD_PERM",
]

INFERENCE_ASYMPTOTIC = "asymptotic"
INFERENCE_PATTERN_PERM = "pattern-permutation"
INFERENCE_STANDARD_PERM = "standard-permutation"

_METHODS = (METHOD_CONGREGATED, METHOD_VECTORIZED)
_INFERENCES = (INFERENCE_ASYMPTOTIC, INFERENCE_PATTERN_PERM, INFERENCE_STANDARD_PERM)


@dataclass(frozen=True)
class Arrangement:
    """Canonical row layout; patterns occupy contiguous slices."""

    values: np.ndarray           # (N, d) reordered rows
    is_y: np.ndarray             # (N,) group labels in the same order
    offsets: np.ndarray          # (n_patterns + 1,) slice bounds
    pattern_masks: np.ndarray    # (n_patterns, L) in canonical order
    report_ids: tuple            # canonical index -> user-facing pattern id
    original_rows: np.ndarray    # canonical position -> input row index

    @property
    def sizes(self) -> tuple:
        return tuple(
            int(self.offsets[a + 1] - self.offsets[a])
            for a in range(len(self.offsets) - 1)
        )


def arrange(data: MultiSourceDataset, part: PatternPartition) -> Arrangement:
    """Reorder rows into the canonical layout described in the module docs."""
    slices = data.schema.column_slices
    canon = sorted(range(part.n_patterns), key=lambda a: tuple(part.masks[a]))
    order: list[int] = []
    bounds = [0]
    for a in canon:
        observed = np.concatenate(
            [np.arange(sl.start, sl.stop) for l, sl in enumerate(slices) if part.masks[a][l]]
        )
        rows = sorted(
            (int(r) for r in part.members[a]),
            key=lambda r: data.values[r, observed].tolist(),
        )
        order.extend(rows)
        bounds.append(len(order))
    order_idx = np.array(order, dtype=np.intp)
    report_ids = tuple(int(a) for a in canon)
    return Arrangement(
        values=data.values[order_idx],
        is_y=data.is_y[order_idx],
        offsets=np.array(bounds, dtype=np.intp),
        pattern_masks=part.masks[canon],
        report_ids=report_ids,
        original_rows=order_idx,
    )


@dataclass
class Prepared:
    """Everything the statistics and diagnostics need, computed once."""

    arrangement: Arrangement
    partition: PatternPartition
    dist: BlockDistanceMatrix
    R: RankMatrix
    bm: BlockMoments
    nms: NullMomentSet
    engine: StatisticEngine
    u_obs: np.ndarray
    k: int
    warnings: list = field(default_factory=list)


def prepare(
    data: MultiSourceDataset,
    part: PatternPartition,
    k: int,
    metric: SourceMetric | None = None,
) -> Prepared:
    """Distances, ranks, and null moments for a filtered partition."""
    arr = arrange(data, part)
    warnings: list[str] = []
    if part.dropped_rows:
        warnings.append(
            f"dropped {len(part.dropped_rows)} row(s) in patterns below the "
            "stability thresholds"
        )
    dist = block_distance_matrix(
        arr.values,
        arr.pattern_masks,
        arr.offsets,
        data.schema.column_slices,
        metric=metric,
    )
    R = assemble_rank_matrix(dist, k)
    for a, b, cand in R.degraded_blocks:
        warnings.append(
            f"pattern pair ({arr.report_ids[a]}, {arr.report_ids[b]}): only "
            f"{cand} candidate neighbor(s) for k={k}; ranks truncated"
        )
    sizes = arr.sizes
    bm = compute_block_moments(R, sizes)
    m_counts = tuple(int(np.sum(~arr.is_y[arr.offsets[a] : arr.offsets[a + 1]])) for a in range(len(sizes)))
    n_counts = tuple(int(np.sum(arr.is_y[arr.offsets[a] : arr.offsets[a + 1]])) for a in range(len(sizes)))
    nms = null_moment_set(bm, R.pairs, m_counts, n_counts, sizes)
    engine = StatisticEngine(R, arr.offsets, nms)
    u_obs = engine.u_vector(arr.is_y)
    return Prepared(
        arrangement=arr,
        partition=part,
        dist=dist,
        R=R,
        bm=bm,
        nms=nms,
        engine=engine,
        u_obs=u_obs,
        k=k,
        warnings=warnings,
    )


def _translate_components(labels, report_ids) -> list:
    """Rewrite canonical pattern indices inside component labels."""
    out = []
    for label in labels:
        kind, rest = label.split("(", 1)
        a, b = (int(t) for t in rest.rstrip(")").split(","))
        ra, rb = sorted((report_ids[a], report_ids[b]))
        out.append(f"{kind}({ra}, {rb})")
    return out


def _generated_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**63))


def run_test(
    data: MultiSourceDataset,
    method: str = METHOD_CONGREGATED,
    k: int = 10,
    inference: str = INFERENCE_ASYMPTOTIC,
    n_replicates: int = 1000,
    seed: int | None = None,
    n_thres: int = 2,
    p_thres: float = 0.1,
    metric: SourceMetric | None = None,
    threads: int = 1,
) -> TestResult:
    """Run one two-sample test end to end and return the result record.

    ``seed`` only matters for permutation inference; when omitted there, a
    fresh one is generated and echoed in the result warnings so the run can
    be reproduced.
    """
    result, _ = run_test_prepared(
        data,
        method=method,
        k=k,
        inference=inference,
        n_replicates=n_replicates,
        seed=seed,
        n_thres=n_thres,
        p_thres=p_thres,
        metric=metric,
        threads=threads,
    )
    return result


def run_test_prepared(
    data: MultiSourceDataset,
    method: str = METHOD_CONGREGATED,
    k: int = 10,
    inference: str = INFERENCE_ASYMPTOTIC,
    n_replicates: int = 1000,
    seed: int | None = None,
    n_thres: int = 2,
    p_thres: float = 0.1,
    metric: SourceMetric | None = None,
    threads: int = 1,
) -> tuple[TestResult, Prepared]:
    """Like ``run_test`` but also hands back the intermediate state."""
    if method not in _METHODS:
        raise InvalidConfigError(f"method must be one of {_METHODS}, got {method!r}")
    if inference not in _INFERENCES:
        raise InvalidConfigError(
            f"inference must be one of {_INFERENCES}, got {inference!r}"
        )
    part = filter_patterns(partition(data), n_thres=n_thres, p_thres=p_thres)
    prep = prepare(data, part, k, metric=metric)
    warnings = list(prep.warnings)
    report_ids = prep.arrangement.report_ids

    if inference == INFERENCE_ASYMPTOTIC:
        statistic = prep.engine.statistic(method, prep.u_obs)
        qf = prep.engine.quad_form(method)
        p_value = chi_square_tail(statistic, qf.df)
        df = qf.df
        dropped = qf.dropped
        warnings.extend(qf.warnings)
    else:
        if seed is None:
            seed = _generated_seed()
            warnings.append(f"seed not provided; generated seed {seed}")
        scheme = SCHEME_PATTERN if inference == INFERENCE_PATTERN_PERM else SCHEME_STANDARD
        out = permutation_test(
            prep.engine, prep.u_obs, method, scheme, n_replicates, seed, threads
        )
        statistic = out["statistic"]
        df = out["df"]
        p_value = out["p_value"]
        dropped = out["dropped_components"]
        warnings.extend(out["warnings"])

    if method == METHOD_VECTORIZED:
        dropped = _translate_components(dropped, report_ids)

    result = TestResult(
        method=method,
        statistic=float(statistic),
        df=int(df),
        p_value=float(p_value),
        inference=inference,
        k=k,
        n_patterns=part.n_patterns,
        pattern_counts=part.pattern_summary(),
        dropped_components=list(dropped),
        warnings=warnings,
    )
    return result, prep


def run_diagnostics(
    data: MultiSourceDataset,
    k: int = 10,
    n_thres: int = 2,
    p_thres: float = 0.1,
    metric: SourceMetric | None = None,
) -> dict:
    """Asymptotic-condition report for a dataset (advisory only)."""
    part = filter_patterns(partition(data), n_thres=n_thres, p_thres=p_thres)
    prep = prepare(data, part, k, metric=metric)
    report = asymptotic_diagnostics(
        prep.R, prep.bm, prep.arrangement.sizes, prep.arrangement.report_ids
    )
    report["k"] = k
    report["n_patterns"] = part.n_patterns
    report["pattern_counts"] = part.pattern_summary()
    if prep.warnings:
        report["warnings"] = prep.warnings + report.get("warnings", [])
    return report
