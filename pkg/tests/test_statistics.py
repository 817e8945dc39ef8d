"""Quadratic forms, chi-square tails, and the convergence diagnostics."""

import numpy as np
import pytest

from brise.datamodel import dataset_from_arrays, partition
from brise.errors import SingularCovarianceError
from brise.pipeline import prepare
from brise.statistics import (
    METHOD_CONGREGATED,
    METHOD_VECTORIZED,
    QuadForm,
    TestResult,
    asymptotic_diagnostics,
    chi_square_tail,
)
from conftest import make_dataset, pinned_instance


def test_chi_square_tail_reference_point():
    # the 0.05 critical value of the 2-df chi-square distribution
    assert chi_square_tail(5.9915, 2) == pytest.approx(0.05, abs=5e-5)


def test_chi_square_tail_edges():
    assert chi_square_tail(0.0, 2) == 1.0
    assert chi_square_tail(-3.0, 2) == 1.0
    assert chi_square_tail(1e4, 2) < 1e-300
    # df=2 has the closed form exp(-t/2)
    for t in (0.5, 1.0, 2.7, 9.3):
        assert chi_square_tail(t, 2) == pytest.approx(np.exp(-t / 2), rel=1e-12)


def test_quad_form_closed_2x2():
    qf = QuadForm(np.array([[2.0, 1.0], [1.0, 2.0]]), ["Ux", "Uy"])
    assert qf.df == 2
    assert qf.dropped == [] and qf.warnings == []
    # inverse is (1/3) [[2,-1],[-1,2]]
    assert qf.value(np.array([1.0, 1.0])) == pytest.approx(2 / 3, rel=1e-14)
    assert qf.value(np.array([1.0, 0.0])) == pytest.approx(2 / 3, rel=1e-14)
    assert qf.value(np.array([0.0, 0.0])) == 0.0


def test_quad_form_closed_2x2_swap_is_bitwise():
    # swapping both coordinates and the matrix must return the same float,
    # which is what makes X<->Y relabeling exact for the aggregated statistic
    rng = np.random.default_rng(30)
    for _ in range(25):
        a = float(rng.uniform(0.5, 3.0))
        c = float(rng.uniform(0.5, 3.0))
        b = float(rng.uniform(-0.9, 0.9)) * np.sqrt(a * c)
        sigma = np.array([[a, b], [b, c]])
        swapped = np.array([[c, b], [b, a]])
        v = rng.normal(size=2)
        one = QuadForm(sigma, ["Ux", "Uy"]).value(v)
        two = QuadForm(swapped, ["Uy", "Ux"]).value(v[::-1])
        assert one == two


def test_quad_form_singular_2x2_drops_to_rank_one():
    qf = QuadForm(np.array([[1.0, 1.0], [1.0, 1.0]]), ["Ux", "Uy"])
    assert qf.df == 1
    assert len(qf.dropped) == 1
    assert qf.warnings
    # along the retained direction (1,1)/sqrt2 the eigenvalue is 2
    assert qf.value(np.array([1.0, 1.0])) == pytest.approx(1.0, rel=1e-12)


def test_quad_form_cholesky_matches_direct_solve():
    rng = np.random.default_rng(31)
    for _ in range(10):
        root = rng.normal(size=(4, 4))
        sigma = root @ root.T + np.eye(4)
        qf = QuadForm(sigma, [f"c{i}" for i in range(4)])
        assert qf.df == 4 and not qf.dropped
        v = rng.normal(size=4)
        direct = float(v @ np.linalg.solve(sigma, v))
        assert qf.value(v) == pytest.approx(direct, rel=1e-10)


def test_quad_form_rank_deficient_matrix():
    rng = np.random.default_rng(32)
    basis = rng.normal(size=(4, 2))
    sigma = basis @ basis.T  # rank 2
    qf = QuadForm(sigma, [f"c{i}" for i in range(4)])
    assert qf.df == 2
    assert len(qf.dropped) == 2
    v = basis @ rng.normal(size=2)  # lies in the retained subspace
    assert np.isfinite(qf.value(v))


def test_quad_form_fully_degenerate_raises():
    with pytest.raises(SingularCovarianceError):
        QuadForm(np.zeros((2, 2)), ["Ux", "Uy"])


def test_statistic_zero_at_the_null_mean():
    _, prep = pinned_instance()
    eng = prep.engine
    assert eng.statistic(METHOD_VECTORIZED, eng.mu_v) == 0.0
    assert eng.statistic(METHOD_CONGREGATED, eng.mu_v) == 0.0
    assert chi_square_tail(0.0, 2) == 1.0


def test_pinned_statistics_frozen():
    # frozen outputs of the pinned two-pattern instance
    _, prep = pinned_instance()
    eng = prep.engine
    t_c = eng.statistic(METHOD_CONGREGATED, prep.u_obs)
    t_v = eng.statistic(METHOD_VECTORIZED, prep.u_obs)
    assert t_c == pytest.approx(0.7430863520853049, rel=1e-12)
    assert t_v == pytest.approx(3.8955874241588555, rel=1e-12)


def test_statistic_invariant_to_pair_order_convention():
    # both statistics are quadratic forms, so any consistent component
    # ordering gives the same value; spot-check by permuting components
    _, prep = pinned_instance()
    eng = prep.engine
    rng = np.random.default_rng(33)
    base = eng.statistic(METHOD_VECTORIZED, prep.u_obs)
    for _ in range(4):
        perm = rng.permutation(len(prep.u_obs))
        centered = prep.u_obs - eng.mu_v
        sigma_p = eng.sigma_v[np.ix_(perm, perm)]
        value = float(centered[perm] @ np.linalg.solve(sigma_p, centered[perm]))
        assert value == pytest.approx(base, rel=1e-9)


def test_unknown_method_rejected():
    _, prep = pinned_instance()
    with pytest.raises(ValueError):
        prep.engine.quad_form("BRISE-q")


def test_result_json_shape():
    result = TestResult(
        method=METHOD_CONGREGATED,
        statistic=1.5,
        df=2,
        p_value=0.47,
        inference="asymptotic",
        k=10,
        n_patterns=2,
        pattern_counts=[{"mask": [1, 1], "m": 3, "n": 3}],
    )
    payload = result.to_json_dict()
    assert list(payload) == [
        "method",
        "statistic",
        "df",
        "p_value",
        "inference",
        "k",
        "n_patterns",
        "pattern_counts",
        "dropped_components",
        "warnings",
    ]
    assert payload["dropped_components"] == [] and payload["warnings"] == []


def test_diagnostics_healthy_instance():
    rng = np.random.default_rng(34)
    specs = [((True, True), 8, 8), ((True, False), 7, 7)]
    data = make_dataset(rng, specs, d_per=3)
    prep = prepare(data, partition(data), k=3)
    report = asymptotic_diagnostics(
        prep.R, prep.bm, prep.arrangement.sizes, prep.arrangement.report_ids
    )
    assert not report["warnings"]
    assert not report["notes"]
    for cond in ("1", "2", "3", "4", "5", "6"):
        entries = report["conditions"][cond]
        assert entries
        for entry in entries:
            assert np.isfinite(entry["ratio"])
    assert len(report["cross_pattern_dependence"]) == 2
    for dep in report["cross_pattern_dependence"]:
        assert np.isfinite(dep["min_eigenvalue"])


def test_diagnostics_single_pattern_notes_no_partner():
    rng = np.random.default_rng(35)
    data = make_dataset(rng, [((True, True), 6, 6)])
    prep = prepare(data, partition(data), k=3)
    report = asymptotic_diagnostics(prep.R, prep.bm, prep.arrangement.sizes)
    assert not report["cross_pattern_dependence"]
    assert any("no distinct overlapping partner" in n for n in report["notes"])


def test_diagnostics_flags_degenerate_ratios():
    # a pattern collapsed to one point makes v1 vanish and the normalized
    # conditions undefined; the report must say so instead of crashing
    vals = np.array(
        [
            [0.0, 10.0],
            [0.0, 20.0],
            [0.0, 30.0],
            [0.0, 40.0],
            [1.0, np.nan],
            [1.0, np.nan],
            [1.0, np.nan],
            [1.0, np.nan],
        ]
    )
    is_y = np.array([False, False, True, True] * 2)
    data = dataset_from_arrays(vals, is_y, [(0, 1), (1, 2)])
    prep = prepare(data, partition(data), k=2)
    report = asymptotic_diagnostics(prep.R, prep.bm, prep.arrangement.sizes)
    assert report["warnings"]
