"""Pattern-aware dissimilarities over shared observed sources.

The dissimilarity between two rows is ``Norm(sum over shared sources of
rho_l(block_i, block_j))``; pairs with no shared source get exactly 0, which
zero-fills the corresponding matrix blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NumericOverflowError, SchemaMismatchError

__all__ = [
    "SourceMetric",
    "BlockDistanceMatrix",
    "default_metric",
    "register_source_metric",
    "pair_dissimilarity",
    "block_distance_matrix",
]


def _sqeuclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")


#: Named per-source dissimilarities. Each entry maps (nA, d_l) x (nB, d_l)
#: arrays to an (nA, nB) matrix, symmetric with zero self-dissimilarity.
_SOURCE_METRICS: dict[str, Callable] = {"sqeuclidean": _sqeuclidean}

_NORMS: dict[str, Callable] = {
    "sqrt": np.sqrt,
    "identity": lambda x: x,
}


def register_source_metric(name: str, fn: Callable) -> None:
    """Add a named per-source dissimilarity to the registry.

    ``fn(A, B)`` must return the (nA, nB) pairwise dissimilarity matrix and
    satisfy rho(u, u) = 0 and rho(u, v) = rho(v, u) >= 0.
    """
    _SOURCE_METRICS[name] = fn


@dataclass(frozen=True)
class SourceMetric:
    """Per-source dissimilarities plus the outer normalization.

    Attributes
    ----------
    per_source : tuple
        One entry per source: a registry name or a callable (see
        :func:`register_source_metric` for the contract).
    norm : str or callable
        Monotone non-decreasing with norm(0) = 0; 'sqrt' (default) turns
        summed squared-Euclidean contributions into the Euclidean distance
        over the concatenated shared sources.
    normalize_overlap : bool
        Divide the inner sum by the shared dimension count before applying
        norm (off by default; the plain sum matches the reference results).
    """

    per_source: tuple
    norm: str | Callable = "sqrt"
    normalize_overlap: bool = False

    def source_fn(self, l: int) -> Callable:
        spec = self.per_source[l]
        if callable(spec):
            return spec
        try:
            return _SOURCE_METRICS[spec]
        except KeyError:
            raise SchemaMismatchError(f"unknown source metric {spec!r}") from None

    def norm_fn(self) -> Callable:
        if callable(self.norm):
            return self.norm
        try:
            return _NORMS[self.norm]
        except KeyError:
            raise SchemaMismatchError(f"unknown norm {self.norm!r}") from None


def default_metric(n_sources: int) -> SourceMetric:
    """Squared Euclidean per source, square-root norm: Euclidean distance
    over the concatenation of shared sources."""
    return SourceMetric(per_source=("sqeuclidean",) * n_sources, norm="sqrt")


@dataclass(frozen=True)
class BlockDistanceMatrix:
    """Dense pattern-blocked distance matrix over an arranged dataset.

    Rows are grouped so pattern blocks are contiguous: pattern ``a`` occupies
    rows ``offsets[a]:offsets[a+1]``.
    """

    values: np.ndarray                     # (N, N), symmetric, zero diagonal
    offsets: np.ndarray                    # (n_patterns + 1,)
    overlap_dims: np.ndarray               # (n_patterns, n_patterns) int
    pairs: tuple[tuple[int, int], ...]     # unordered overlapping pairs, a <= b

    @property
    def n_patterns(self) -> int:
        return len(self.offsets) - 1

    def block(self, a: int, b: int) -> np.ndarray:
        return self.values[
            self.offsets[a] : self.offsets[a + 1],
            self.offsets[b] : self.offsets[b + 1],
        ]


def pair_dissimilarity(
    zi: np.ndarray,
    zj: np.ndarray,
    mask_i: np.ndarray,
    mask_j: np.ndarray,
    column_slices,
    metric: SourceMetric,
) -> float:
    """Dissimilarity between two rows (reference scalar path).

    Sums the per-source dissimilarities over sources observed in both rows,
    then applies the norm; returns exactly 0.0 when no source is shared.
    """
    shared = np.asarray(mask_i, dtype=bool) & np.asarray(mask_j, dtype=bool)
    if not shared.any():
        return 0.0
    total = 0.0
    dims = 0
    for l, sl in enumerate(column_slices):
        if not shared[l]:
            continue
        contrib = metric.source_fn(l)(zi[sl][None, :], zj[sl][None, :])
        total += float(np.asarray(contrib).reshape(()))
        dims += sl.stop - sl.start
    if metric.normalize_overlap:
        total /= dims
    return float(metric.norm_fn()(total))


def block_distance_matrix(
    values: np.ndarray,
    pattern_masks: np.ndarray,
    offsets: np.ndarray,
    column_slices,
    metric: SourceMetric | None = None,
) -> BlockDistanceMatrix:
    """Assemble the full N x N distance matrix over pattern-contiguous rows.

    Parameters
    ----------
    values : (N, d) array with rows already grouped by pattern
    pattern_masks : (n_patterns, L) bool observation masks
    offsets : (n_patterns + 1,) block boundaries
    column_slices : per-source column ranges
    metric : defaults to Euclidean over shared sources

    Raises
    ------
    NumericOverflowError
        If any assembled distance is non-finite.
    """
    n_pat = pattern_masks.shape[0]
    if metric is None:
        metric = default_metric(len(column_slices))
    norm = metric.norm_fn()

    n_rows = values.shape[0]
    out = np.zeros((n_rows, n_rows), dtype=np.float64)
    overlap_dims = np.zeros((n_pat, n_pat), dtype=np.int64)
    pairs = []
    for a in range(n_pat):
        rows_a = slice(offsets[a], offsets[a + 1])
        for b in range(a, n_pat):
            shared = pattern_masks[a] & pattern_masks[b]
            if not shared.any():
                continue
            pairs.append((a, b))
            rows_b = slice(offsets[b], offsets[b + 1])
            total = None
            dims = 0
            for l in np.flatnonzero(shared):
                sl = column_slices[l]
                contrib = metric.source_fn(l)(values[rows_a, sl], values[rows_b, sl])
                total = contrib if total is None else total + contrib
                dims += sl.stop - sl.start
            overlap_dims[a, b] = overlap_dims[b, a] = dims
            if metric.normalize_overlap:
                total = total / dims
            dist = norm(total)
            if a == b:
                # mirror the strict upper triangle: exact symmetry, zero diagonal
                upper = np.triu(dist, 1)
                dist = upper + upper.T
                out[rows_a, rows_b] = dist
            else:
                out[rows_a, rows_b] = dist
                out[rows_b, rows_a] = dist.T
    if not np.isfinite(out).all():
        raise NumericOverflowError("non-finite dissimilarity encountered")
    return BlockDistanceMatrix(
        values=out,
        offsets=np.asarray(offsets),
        overlap_dims=overlap_dims,
        pairs=tuple(pairs),
    )
