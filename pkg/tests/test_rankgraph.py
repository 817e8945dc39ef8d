"""Nearest-neighbor rank blocks: tie averaging, row sums, symmetrization."""

import numpy as np
import pytest

from brise.datamodel import partition
from brise.errors import EmptyCandidatesError, InvalidKError
from brise.metrics import block_distance_matrix
from brise.pipeline import arrange
from brise.rankgraph import assemble_rank_matrix, rank_block
from conftest import make_dataset


def build_rank_matrix(data, k):
    part = partition(data)
    arr = arrange(data, part)
    dist = block_distance_matrix(
        arr.values, arr.pattern_masks, arr.offsets, data.schema.column_slices
    )
    return arr, assemble_rank_matrix(dist, k)


def test_tied_pair_shares_top_ranks():
    # two nearest tied at distance 1.0 would occupy ranks 3 and 2
    dist = np.array([[1.0, 1.0, 2.0]])
    ranks = rank_block(dist, k=3, within=False)
    assert ranks.tolist() == [[2.5, 2.5, 1.0]]


def test_tie_straddling_the_k_boundary():
    # positions 1 and 2 straddle k=1, sharing ranks 1 and 0
    dist = np.array([[4.0, 4.0]])
    ranks = rank_block(dist, k=1, within=False)
    assert ranks.tolist() == [[0.5, 0.5]]


def test_plain_ordering_without_ties():
    dist = np.array([[5.0, 3.0, 9.0]])
    ranks = rank_block(dist, k=2, within=False)
    assert ranks.tolist() == [[1.0, 2.0, 0.0]]


def test_all_tied_row_spreads_mass_evenly():
    for c in (2, 3, 5):
        for k in range(1, c + 1):
            dist = np.full((1, c), 7.0)
            ranks = rank_block(dist, k=k, within=False)
            expected = k * (k + 1) / (2 * c)
            assert np.allclose(ranks, expected)
            assert ranks.sum() == pytest.approx(k * (k + 1) / 2)


def test_within_block_excludes_self():
    pts = np.array([0.0, 1.0, 3.0, 6.0])
    dist = np.abs(pts[:, None] - pts[None, :])
    ranks = rank_block(dist, k=2, within=True)
    assert not ranks.diagonal().any()
    # row 0: nearest is 1 (rank 2), then 3 (rank 1)
    assert ranks[0].tolist() == [0.0, 2.0, 1.0, 0.0]


def test_fewer_candidates_than_k():
    # c=2 candidates with k=3: only ranks 3 and 2 are assigned
    dist = np.array([[1.0, 2.0]])
    ranks = rank_block(dist, k=3, within=False)
    assert ranks.tolist() == [[3.0, 2.0]]


def test_rank_block_input_validation():
    with pytest.raises(InvalidKError):
        rank_block(np.ones((2, 2)), k=0, within=False)
    with pytest.raises(EmptyCandidatesError):
        rank_block(np.zeros((1, 1)), k=1, within=True)


def test_directed_row_sum_identity():
    # every directed row with >= k candidates sums to k(k+1)/2, ties included
    for seed in range(8):
        rng = np.random.default_rng(seed)
        n_b = int(rng.integers(4, 9))
        k = int(rng.integers(1, n_b))
        dist = rng.integers(0, 4, size=(3, n_b)).astype(float)  # many ties
        ranks = rank_block(dist, k=k, within=False)
        assert np.allclose(ranks.sum(axis=1), k * (k + 1) / 2)


def test_assembled_matrix_structure():
    for seed in range(6):
        rng = np.random.default_rng(100 + seed)
        specs = [((True, True), 5, 5), ((True, False), 4, 4), ((False, True), 4, 5)]
        data = make_dataset(rng, specs)
        k = int(rng.integers(1, 4))
        arr, R = build_rank_matrix(data, k)
        assert R.symmetrized
        assert np.array_equal(R.values, R.values.T)
        assert not R.values.diagonal().any()
        assert R.values.max() <= k
        assert R.values.min() >= 0.0
        # the (0,1)-only and (1,0)-only patterns share no source
        masks = [tuple(m) for m in arr.pattern_masks]
        a = masks.index((False, True))
        b = masks.index((True, False))
        lo, hi = min(a, b), max(a, b)
        assert not R.block(lo, hi).any()
        assert (lo, hi) not in R.pairs


def test_symmetrization_conserves_total_mass():
    rng = np.random.default_rng(200)
    specs = [((True, True), 5, 4), ((True, False), 4, 5)]
    data = make_dataset(rng, specs)
    part = partition(data)
    arr = arrange(data, part)
    dist = block_distance_matrix(
        arr.values, arr.pattern_masks, arr.offsets, data.schema.column_slices
    )
    k = 3
    directed = np.zeros_like(dist.values)
    for a, b in dist.pairs:
        combos = ((a, b), (b, a)) if a != b else ((a, a),)
        for src, dst in combos:
            rows = slice(arr.offsets[src], arr.offsets[src + 1])
            cols = slice(arr.offsets[dst], arr.offsets[dst + 1])
            directed[rows, cols] = rank_block(
                dist.values[rows, cols], k, within=src == dst
            )
    R = assemble_rank_matrix(dist, k)
    assert R.values.sum() == pytest.approx(directed.sum(), rel=1e-12)
    assert np.array_equal(R.values, (directed + directed.T) / 2.0)


def test_degraded_blocks_recorded():
    rng = np.random.default_rng(300)
    specs = [((True, True), 2, 2), ((True, False), 4, 4)]
    data = make_dataset(rng, specs)
    arr, R = build_rank_matrix(data, k=5)
    masks = [tuple(m) for m in arr.pattern_masks]
    small = masks.index((True, True))  # 4 rows
    big = masks.index((True, False))   # 8 rows
    degraded = {(a, b): c for a, b, c in R.degraded_blocks}
    # the small pattern offers 3 within-candidates and 4 cross-candidates
    assert degraded[(small, small)] == 3
    assert degraded[(big, small)] == 4
    assert (big, big) not in degraded  # 7 candidates >= 5
