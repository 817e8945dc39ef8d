"""Independent references for the closed-form null moments.

The enumeration oracle walks every pattern-wise label assignment that
preserves the per-pattern group counts and reports the exact distribution
moments of the per-pair rank sums.  It shares no code with the closed
forms; agreement between the two is the strongest correctness check in the
package.  When enumeration is infeasible a sampling estimate with standard
errors stands in.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import TooLargeError
from .permutation import SCHEME_PATTERN, collect_u_samples
from .rankgraph import RankMatrix
from .statistics import StatisticEngine

__all__ = [
    "ENUMERATION_CAP",
    "OracleMoments",
    "SampledMoments",
    "enumeration_count",
    "enumeration_oracle",
    "sampled_moments",
    "oracle_report",
]

ENUMERATION_CAP = 1_000_000


@dataclass(frozen=True)
class OracleMoments:
    """Exact moments of the per-pair rank sums under pattern-wise relabeling."""

    pairs: tuple
    mu: np.ndarray          # (2|I|,) component means, (Ux, Uy) per pair
    sigma: np.ndarray       # (2|I|, 2|I|) population covariance
    n_assignments: int


@dataclass(frozen=True)
class SampledMoments:
    """Monte Carlo estimate of the same moments, with standard errors."""

    pairs: tuple
    mu: np.ndarray
    sigma: np.ndarray
    se_mu: np.ndarray
    se_sigma: np.ndarray
    n_samples: int


def enumeration_count(sizes, m_counts) -> int:
    """Number of pattern-wise assignments preserving every group count."""
    total = 1
    for size, m in zip(sizes, m_counts):
        total *= comb(int(size), int(m))
    return total


def enumeration_oracle(
    R: RankMatrix,
    m_counts,
    n_counts,
    cap: int = ENUMERATION_CAP,
) -> OracleMoments:
    """Exact null moments by brute force over all label assignments."""
    offsets = R.offsets
    sizes = [int(offsets[a + 1] - offsets[a]) for a in range(R.n_patterns)]
    for a, (size, m, n) in enumerate(zip(sizes, m_counts, n_counts)):
        if m + n != size:
            raise ValueError(f"pattern {a}: group counts {m}+{n} != size {size}")
    total = enumeration_count(sizes, m_counts)
    if total > cap:
        raise TooLargeError(
            f"{total} label assignments exceed the enumeration cap of {cap}; "
            "use the sampling estimate instead"
        )

    # per pattern: all (x rows, y rows) splits, as global row indices
    splits = []
    for a, size in enumerate(sizes):
        lo = int(offsets[a])
        rows = list(range(lo, lo + size))
        options = []
        for chosen in itertools.combinations(range(size), int(m_counts[a])):
            in_x = set(chosen)
            x_idx = np.array([rows[i] for i in range(size) if i in in_x], dtype=np.intp)
            y_idx = np.array([rows[i] for i in range(size) if i not in in_x], dtype=np.intp)
            options.append((x_idx, y_idx))
        splits.append(options)

    values = R.values
    pairs = R.pairs
    u = np.empty((total, 2 * len(pairs)))
    for row, assignment in enumerate(itertools.product(*splits)):
        for i, (a, b) in enumerate(pairs):
            xa, ya = assignment[a]
            xb, yb = assignment[b]
            u[row, 2 * i] = values[np.ix_(xa, xb)].sum()
            u[row, 2 * i + 1] = values[np.ix_(ya, yb)].sum()

    mu = u.mean(axis=0)
    centered = u - mu
    sigma = centered.T @ centered / total
    return OracleMoments(pairs=pairs, mu=mu, sigma=sigma, n_assignments=total)


def sampled_moments(
    engine: StatisticEngine,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> SampledMoments:
    """Monte Carlo moments from pattern-wise relabelings.

    Covariance uses the unbiased (n-1) normalization; the covariance
    standard errors come from the usual asymptotic formula based on fourth
    sample moments.
    """
    u = collect_u_samples(engine, SCHEME_PATTERN, n_samples, seed, threads)
    mu = u.mean(axis=0)
    centered = u - mu
    sigma = centered.T @ centered / (n_samples - 1)
    se_mu = centered.std(axis=0, ddof=1) / np.sqrt(n_samples)
    sq = centered**2
    fourth = sq.T @ sq / n_samples
    var_sigma = (fourth - sigma**2) / n_samples
    se_sigma = np.sqrt(np.maximum(var_sigma, 0.0))
    return SampledMoments(
        pairs=engine.pairs,
        mu=mu,
        sigma=sigma,
        se_mu=se_mu,
        se_sigma=se_sigma,
        n_samples=n_samples,
    )


def oracle_report(
    engine: StatisticEngine,
    cap: int = ENUMERATION_CAP,
    n_samples: int = 20_000,
    seed: int = 0,
    threads: int = 1,
    tolerance: float = 1e-9,
) -> dict:
    """Compare the closed-form moments against an independent reference.

    Enumerates when the assignment count fits under ``cap``; otherwise
    samples and reports deviations in standard-error units.
    """
    sizes = engine.nms.sizes
    m_counts = engine.nms.m_counts
    total = enumeration_count(sizes, m_counts)
    report: dict = {"n_assignments": total, "components": list(engine.labels_v)}
    if total <= cap:
        om = enumeration_oracle(engine.R, m_counts, engine.nms.n_counts, cap=cap)
        mu_diff = np.abs(engine.mu_v - om.mu)
        sigma_diff = np.abs(engine.sigma_v - om.sigma)
        report.update(
            {
                "mode": "enumeration",
                "max_abs_mean_error": float(mu_diff.max()),
                "max_abs_covariance_error": float(sigma_diff.max()),
                "tolerance": tolerance,
                "passed": bool(mu_diff.max() <= tolerance and sigma_diff.max() <= tolerance),
            }
        )
    else:
        sm = sampled_moments(engine, n_samples, seed, threads)
        with np.errstate(divide="ignore", invalid="ignore"):
            z_mu = np.abs(engine.mu_v - sm.mu) / sm.se_mu
            z_sigma = np.abs(engine.sigma_v - sm.sigma) / sm.se_sigma
        z_mu = z_mu[np.isfinite(z_mu)]
        z_sigma = z_sigma[np.isfinite(z_sigma)]
        worst = float(max(z_mu.max() if z_mu.size else 0.0, z_sigma.max() if z_sigma.size else 0.0))
        report.update(
            {
                "mode": "sampling",
                "n_samples": n_samples,
                "max_deviation_in_se": worst,
                "passed": bool(worst <= 5.0),
            }
        )
    return report
