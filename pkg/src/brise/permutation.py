"""Permutation relabeling and Monte Carlo inference.

Replicate ``i`` draws from its own Philox 4x64 stream derived from
``(seed, i)``, so the set of relabelings depends only on the seed and the
replicate count.  Workers fill a preallocated replicate array by index and
every reduction happens after the fill in one deterministic pass, which
makes results bitwise identical across thread counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import InvalidConfigError
from .statistics import METHOD_CONGREGATED, METHOD_VECTORIZED, QuadForm, StatisticEngine

__all__ = [
    "SCHEME_PATTERN",
    "SCHEME_STANDARD",
    "replicate_stream",
    "permute_labels",
    "collect_u_samples",
    "permutation_test",
]

SCHEME_PATTERN = "pattern-wise"
SCHEME_STANDARD = "standard"


def replicate_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one replicate, split from the root seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def permute_labels(
    rng: np.random.Generator,
    scheme: str,
    offsets: np.ndarray,
    m_counts,
) -> np.ndarray:
    """Draw one relabeling as a boolean is-second-group vector.

    The pattern-wise scheme reshuffles labels inside every pattern slice,
    preserving each (m_a, n_a); the standard scheme reshuffles all rows
    jointly, preserving only the totals.
    """
    n_total = int(offsets[-1])
    is_y = np.empty(n_total, dtype=bool)
    if scheme == SCHEME_PATTERN:
        for a, m_a in enumerate(m_counts):
            lo, hi = int(offsets[a]), int(offsets[a + 1])
            perm = rng.permutation(hi - lo)
            block = np.empty(hi - lo, dtype=bool)
            block[perm[:m_a]] = False
            block[perm[m_a:]] = True
            is_y[lo:hi] = block
    elif scheme == SCHEME_STANDARD:
        m_total = int(sum(m_counts))
        perm = rng.permutation(n_total)
        is_y[perm[:m_total]] = False
        is_y[perm[m_total:]] = True
    else:
        raise InvalidConfigError(f"unknown permutation scheme {scheme!r}")
    return is_y


def _fill_range(engine: StatisticEngine, scheme, seed, out, lo, hi):
    offsets = engine.offsets
    m_counts = engine.nms.m_counts
    for i in range(lo, hi):
        rng = replicate_stream(seed, i)
        labels = permute_labels(rng, scheme, offsets, m_counts)
        out[i] = engine.u_vector(labels)


def collect_u_samples(
    engine: StatisticEngine,
    scheme: str,
    n_replicates: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Per-pair rank sums for every permutation replicate, one row each."""
    if n_replicates < 1:
        raise InvalidConfigError("need at least one permutation replicate")
    out = np.empty((n_replicates, 2 * len(engine.pairs)))
    threads = max(1, int(threads))
    if threads == 1:
        _fill_range(engine, scheme, seed, out, 0, n_replicates)
        return out
    step = -(-n_replicates // threads)
    bounds = [(lo, min(lo + step, n_replicates)) for lo in range(0, n_replicates, step)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(_fill_range, engine, scheme, seed, out, lo, hi)
            for lo, hi in bounds
        ]
        for f in futures:
            f.result()
    return out


def permutation_test(
    engine: StatisticEngine,
    u_obs: np.ndarray,
    method: str,
    scheme: str,
    n_replicates: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Permutation inference with the add-one p-value convention.

    Pattern-wise replicates reuse the closed-form null moments, so the
    statistic is the same function as in the asymptotic test.  Standard
    replicates instead center and scale by their own empirical moments
    (sample mean and covariance of the replicate rank sums) because the
    closed-form moments assume within-pattern exchangeability, which the
    standard scheme deliberately breaks.
    """
    samples = collect_u_samples(engine, scheme, n_replicates, seed, threads)

    if scheme == SCHEME_PATTERN:
        t_obs = engine.statistic(method, u_obs)
        qf = engine.quad_form(method)
        t_star = np.array([engine.statistic(method, samples[i]) for i in range(len(samples))])
        dropped, warnings = list(qf.dropped), list(qf.warnings)
        df = qf.df
    else:
        if n_replicates < 2:
            raise InvalidConfigError(
                "standard-permutation inference estimates moments from the "
                "replicates and needs at least two"
            )
        if method == METHOD_CONGREGATED:
            # aggregate replicate rows with the same exactly-rounded sum as
            # the observed vector so identical labelings tie exactly
            vecs = np.array([engine.aggregate(samples[i]) for i in range(len(samples))])
            v_obs = engine.aggregate(u_obs)
            labels = ["Ux", "Uy"]
        elif method == METHOD_VECTORIZED:
            vecs = samples
            v_obs = u_obs
            labels = engine.labels_v
        else:
            raise InvalidConfigError(f"unknown method {method!r}")
        mu_hat = vecs.mean(axis=0)
        sigma_hat = np.cov(vecs, rowvar=False, ddof=1).reshape(len(labels), len(labels))
        qf = QuadForm(sigma_hat, labels)
        t_obs = qf.value(v_obs - mu_hat)
        centered = vecs - mu_hat
        t_star = np.array([qf.value(centered[i]) for i in range(len(centered))])
        dropped, warnings = list(qf.dropped), list(qf.warnings)
        df = qf.df

    exceed = int(np.count_nonzero(t_star >= t_obs))
    p_value = (1 + exceed) / (1 + n_replicates)
    return {
        "statistic": float(t_obs),
        "df": int(df),
        "p_value": float(p_value),
        "n_replicates": int(n_replicates),
        "n_exceeding": exceed,
        "dropped_components": dropped,
        "warnings": warnings,
    }
