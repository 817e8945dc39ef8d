"""Nearest-neighbor rank blocks and the symmetrized rank matrix.

Within each pattern-pair block, every row ranks its candidates by distance:
the k'-th nearest neighbor receives rank k+1-k' (so the nearest gets k),
candidates beyond the k-th get 0, and tied candidates share the average of
the ranks their positions would occupy.  Within-pattern blocks exclude self;
cross-pattern blocks are bipartite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCandidatesError, InvalidKError
from .metrics import BlockDistanceMatrix

__all__ = ["RankMatrix", "rank_block", "assemble_rank_matrix"]


@dataclass(frozen=True)
class RankMatrix:
    """Symmetrized rank matrix over pattern-contiguous rows."""

    values: np.ndarray                     # (N, N)
    k: int
    offsets: np.ndarray
    pairs: tuple[tuple[int, int], ...]     # unordered overlapping pairs
    symmetrized: bool
    degraded_blocks: tuple[tuple[int, int, int], ...] = ()
    # (a, b, candidate_count) for directed blocks with fewer candidates than k

    @property
    def n_patterns(self) -> int:
        return len(self.offsets) - 1

    def block(self, a: int, b: int) -> np.ndarray:
        return self.values[
            self.offsets[a] : self.offsets[a + 1],
            self.offsets[b] : self.offsets[b + 1],
        ]


def rank_block(dist: np.ndarray, k: int, *, within: bool) -> np.ndarray:
    """Directed rank block for one pattern pair.

    Parameters
    ----------
    dist : (nA, nB) distances; square with zero diagonal if ``within``
    k : neighbor count
    within : exclude self-distances from candidacy

    Returns
    -------
    (nA, nB) array: position p (1-based, by ascending distance) maps to
    max(k+1-p, 0); exact distance ties share the average over their span,
    including zero-rank positions when a tied group straddles the k-boundary.
    With c < k candidates only ranks k..k-c+1 appear.
    """
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    dist = np.asarray(dist, dtype=np.float64)
    n_a, n_b = dist.shape
    cand = n_b - 1 if within else n_b
    if cand < 1:
        raise EmptyCandidatesError("a rank block needs at least one candidate")

    if within:
        dist = dist.copy()
        np.fill_diagonal(dist, np.inf)

    order = np.argsort(dist, axis=1, kind="stable")
    positions = np.arange(n_b)
    pos_vals = np.where(positions < cand, np.maximum(k - positions, 0), 0).astype(
        np.float64
    )

    out = np.zeros_like(dist)
    np.put_along_axis(out, order, np.broadcast_to(pos_vals, dist.shape).copy(), axis=1)

    # Tie fix-up is only needed when a tied group touches a positive-rank
    # position, i.e. an adjacency among the first k sorted candidates.
    sorted_d = np.take_along_axis(dist, order, axis=1)
    check = min(k, cand - 1)
    if check > 0:
        flagged = (sorted_d[:, 1:check + 1] == sorted_d[:, :check]).any(axis=1)
        for i in np.flatnonzero(flagged):
            row_sorted = sorted_d[i]
            row_order = order[i]
            p = 0
            while p < cand:
                q = p
                while q + 1 < cand and row_sorted[q + 1] == row_sorted[q]:
                    q += 1
                if q > p:
                    out[i, row_order[p : q + 1]] = pos_vals[p : q + 1].mean()
                p = q + 1
    if within:
        np.fill_diagonal(out, 0.0)
    return out


def assemble_rank_matrix(dist: BlockDistanceMatrix, k: int) -> RankMatrix:
    """Rank every ordered overlapping block, zero-fill the rest, symmetrize.

    Directed blocks whose candidate count falls below k are recorded in
    ``degraded_blocks`` so callers can surface a warning.
    """
    if k < 1:
        raise InvalidKError(f"k must be >= 1, got {k}")
    offsets = dist.offsets
    n_rows = dist.values.shape[0]
    directed = np.zeros((n_rows, n_rows), dtype=np.float64)
    degraded = []
    for a, b in dist.pairs:
        for src, dst in ((a, b), (b, a)) if a != b else ((a, a),):
            rows = slice(offsets[src], offsets[src + 1])
            cols = slice(offsets[dst], offsets[dst + 1])
            within = src == dst
            cand = (offsets[dst + 1] - offsets[dst]) - (1 if within else 0)
            if cand < k:
                degraded.append((src, dst, int(cand)))
            directed[rows, cols] = rank_block(
                dist.values[rows, cols], k, within=within
            )
    sym = (directed + directed.T) / 2.0
    return RankMatrix(
        values=sym,
        k=k,
        offsets=offsets,
        pairs=dist.pairs,
        symmetrized=True,
        degraded_blocks=tuple(degraded),
    )
