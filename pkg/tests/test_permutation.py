"""Permutation engine: reproducible streams, relabelings, p-value bounds."""

import numpy as np
import pytest

from brise.datamodel import partition
from brise.errors import InvalidConfigError
from brise.permutation import (
    SCHEME_PATTERN,
    SCHEME_STANDARD,
    collect_u_samples,
    permutation_test,
    permute_labels,
    replicate_stream,
)
from brise.pipeline import prepare
from brise.statistics import METHOD_CONGREGATED, METHOD_VECTORIZED
from conftest import make_dataset, pinned_instance, random_specs


def prepared(seed=40, shift=0.0):
    rng = np.random.default_rng(seed)
    specs = [((True, True), 6, 6), ((True, False), 5, 6), ((False, True), 6, 5)]
    data = make_dataset(rng, specs, d_per=2, shift=shift)
    return prepare(data, partition(data), k=4)


def test_replicate_streams_reproducible_and_distinct():
    a = replicate_stream(123, 7).random(5)
    b = replicate_stream(123, 7).random(5)
    c = replicate_stream(123, 8).random(5)
    d = replicate_stream(124, 7).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_pattern_scheme_preserves_every_group_count():
    prep = prepared()
    offsets = prep.arrangement.offsets
    m_counts = prep.nms.m_counts
    for i in range(50):
        rng = replicate_stream(99, i)
        is_y = permute_labels(rng, SCHEME_PATTERN, offsets, m_counts)
        for a, m_a in enumerate(m_counts):
            block = is_y[offsets[a] : offsets[a + 1]]
            assert int((~block).sum()) == m_a


def test_standard_scheme_preserves_only_totals():
    prep = prepared()
    offsets = prep.arrangement.offsets
    m_counts = prep.nms.m_counts
    m_total = sum(m_counts)
    broke_pattern_counts = False
    for i in range(50):
        rng = replicate_stream(99, i)
        is_y = permute_labels(rng, SCHEME_STANDARD, offsets, m_counts)
        assert int((~is_y).sum()) == m_total
        per_pattern = [
            int((~is_y[offsets[a] : offsets[a + 1]]).sum())
            for a in range(len(m_counts))
        ]
        if tuple(per_pattern) != tuple(m_counts):
            broke_pattern_counts = True
    assert broke_pattern_counts


def test_unknown_scheme_rejected():
    prep = prepared()
    with pytest.raises(InvalidConfigError):
        permute_labels(
            replicate_stream(0, 0),
            "bootstrap",
            prep.arrangement.offsets,
            prep.nms.m_counts,
        )


def test_samples_depend_only_on_seed_not_threads():
    prep = prepared()
    eng = prep.engine
    for scheme in (SCHEME_PATTERN, SCHEME_STANDARD):
        base = collect_u_samples(eng, scheme, 64, seed=5, threads=1)
        for threads in (2, 8):
            again = collect_u_samples(eng, scheme, 64, seed=5, threads=threads)
            assert np.array_equal(base, again)


def test_pvalue_bounds_and_determinism():
    prep = prepared()
    eng = prep.engine
    for n_rep in (1, 7, 40):
        for method in (METHOD_CONGREGATED, METHOD_VECTORIZED):
            out = permutation_test(
                eng, prep.u_obs, method, SCHEME_PATTERN, n_rep, seed=13
            )
            assert 1 / (n_rep + 1) <= out["p_value"] <= 1.0
            again = permutation_test(
                eng, prep.u_obs, method, SCHEME_PATTERN, n_rep, seed=13, threads=4
            )
            assert again == out


def test_add_one_counting():
    prep = prepared()
    eng = prep.engine
    out = permutation_test(
        eng, prep.u_obs, METHOD_CONGREGATED, SCHEME_PATTERN, 99, seed=3
    )
    assert out["p_value"] == (1 + out["n_exceeding"]) / 100
    assert out["n_replicates"] == 99


def test_identity_relabeling_ties_the_observed_statistic():
    # a replicate that reproduces the observed labeling must tie exactly,
    # under both schemes, keeping the add-one p-value honest
    prep = prepared()
    eng = prep.engine
    arr_is_y = prep.arrangement.is_y
    u_again = eng.u_vector(arr_is_y)
    assert np.array_equal(u_again, prep.u_obs)
    assert eng.statistic(METHOD_CONGREGATED, u_again) == eng.statistic(
        METHOD_CONGREGATED, prep.u_obs
    )


def test_standard_scheme_requires_two_replicates():
    prep = prepared()
    with pytest.raises(InvalidConfigError):
        permutation_test(
            prep.engine, prep.u_obs, METHOD_CONGREGATED, SCHEME_STANDARD, 1, seed=0
        )


def test_standard_scheme_both_methods_run():
    prep = prepared()
    for method in (METHOD_CONGREGATED, METHOD_VECTORIZED):
        out = permutation_test(
            prep.engine, prep.u_obs, method, SCHEME_STANDARD, 60, seed=17, threads=4
        )
        assert 1 / 61 <= out["p_value"] <= 1.0
        assert np.isfinite(out["statistic"])


def test_pattern_scheme_pvalue_tracks_asymptotic_tail():
    # with a strong shift both routes must call the difference significant
    prep = prepared(shift=2.5)
    eng = prep.engine
    out = permutation_test(
        eng, prep.u_obs, METHOD_CONGREGATED, SCHEME_PATTERN, 400, seed=21, threads=4
    )
    assert out["p_value"] <= 0.05


def test_pinned_instance_permutation_is_deterministic():
    _, prep = pinned_instance()
    eng = prep.engine
    one = permutation_test(
        eng, prep.u_obs, METHOD_CONGREGATED, SCHEME_PATTERN, 200, seed=7
    )
    two = permutation_test(
        eng, prep.u_obs, METHOD_CONGREGATED, SCHEME_PATTERN, 200, seed=7, threads=8
    )
    assert one == two


def test_empirical_moments_track_closed_forms():
    # pattern-wise sample moments must approach the exact null moments
    rng = np.random.default_rng(44)
    specs = random_specs(rng, n_patterns=2, lo=8, hi=10)
    data = make_dataset(rng, specs)
    prep = prepare(data, partition(data), k=3)
    eng = prep.engine
    samples = collect_u_samples(eng, SCHEME_PATTERN, 20000, seed=9, threads=8)
    emp_mu = samples.mean(axis=0)
    emp_sigma = np.cov(samples, rowvar=False, ddof=1)
    sd = np.sqrt(np.diag(eng.sigma_v))
    assert np.max(np.abs(emp_mu - eng.mu_v) / np.maximum(sd / np.sqrt(20000), 1e-12)) < 6
    scale = np.maximum(np.abs(eng.sigma_v).max() / np.sqrt(20000), 1e-12)
    assert np.max(np.abs(emp_sigma - eng.sigma_v)) < 12 * scale
