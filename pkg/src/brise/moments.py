"""Closed-form null moments of within-group rank sums under pattern-wise
permutation, and the assembly of the per-pair and aggregated covariances.

All quantities depend only on the symmetrized rank matrix and the per-pattern
group counts, so they are invariant across permutation replicates and are
computed once per dataset.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum

import numpy as np

from .errors import DegeneratePatternError, InsufficientPatternSizeError
from .rankgraph import RankMatrix

__all__ = [
    "BlockMoments",
    "NullMomentSet",
    "compute_block_moments",
    "null_moment_set",
    "assemble_sigma_v",
    "assemble_sigma_c",
    "pair_weight",
]


@dataclass(frozen=True)
class BlockMoments:
    """First/second-order rank-block summaries.

    Keyed by ordered pattern pairs (a, b) with overlap:
      row_means[(a,b)] : per-row mean rank against pattern b's columns,
                         denominator N_b - delta_ab (self excluded within)
      r0[(a,b)]        : mean of the row means (the block's average rank)
      r2sq[(a,b)]      : mean squared entry, same denominators
      centered[(a,b)]  : row means minus r0
    Triples (a, b, g), canonical b <= g:
      r1sq             : mean of row_means[(a,b)] * row_means[(a,g)]
    """

    row_means: dict
    centered: dict
    r0: dict
    r2sq: dict
    r1sq: dict

    def r1sq_at(self, a: int, b: int, g: int) -> float:
        return self.r1sq[(a, min(b, g), max(b, g))]

    def v1(self, a: int, b: int, g: int) -> float:
        """Covariance of the (a,b) and (a,g) row means over pattern a."""
        return self.r1sq_at(a, b, g) - self.r0[(a, b)] * self.r0[(a, g)]

    def v2(self, a: int, b: int) -> float:
        """Variance proxy of the (a,b) block entries."""
        return self.r2sq[(a, b)] - self.r0[(a, b)] ** 2


def compute_block_moments(R: RankMatrix, sizes) -> BlockMoments:
    """Evaluate the block summaries for every ordered overlapping pair."""
    if not R.symmetrized:
        raise ValueError("block moments are defined on the symmetrized matrix")
    ordered = []
    for a, b in R.pairs:
        ordered.append((a, b))
        if a != b:
            ordered.append((b, a))

    row_means, centered, r0, r2sq = {}, {}, {}, {}
    for a, b in ordered:
        delta = 1 if a == b else 0
        denom = sizes[b] - delta
        if denom == 0:
            raise DegeneratePatternError(
                f"pattern {b} has no candidate columns in block ({a},{b})"
            )
        block = R.block(a, b)
        means = block.sum(axis=1) / denom
        row_means[(a, b)] = means
        r0[(a, b)] = float(means.mean())
        r2sq[(a, b)] = float((block**2).sum() / (sizes[a] * denom))
        centered[(a, b)] = means - r0[(a, b)]

    partners = {}
    for a, b in ordered:
        partners.setdefault(a, []).append(b)
    r1sq = {}
    for a, lst in partners.items():
        for i, b in enumerate(sorted(lst)):
            for g in sorted(lst)[i:]:
                r1sq[(a, b, g)] = float(
                    (row_means[(a, b)] * row_means[(a, g)]).mean()
                )
    return BlockMoments(
        row_means=row_means, centered=centered, r0=r0, r2sq=r2sq, r1sq=r1sq
    )


@dataclass(frozen=True)
class NullMomentSet:
    """Means, variances, and covariances of the per-pair rank sums under the
    pattern-wise permutation null.

    ``pairs`` fixes the component order (lexicographic) used everywhere
    downstream.  Cross-pair covariances come from :meth:`cov`, which aligns
    the shared pattern index into first position via the symmetry
    Ux(a,b) = Ux(b,a) before applying the closed form.
    """

    pairs: tuple[tuple[int, int], ...]
    mu_x: dict
    mu_y: dict
    var_x: dict
    var_y: dict
    cov_xy: dict
    bm: BlockMoments
    m_counts: tuple[int, ...]
    n_counts: tuple[int, ...]
    sizes: tuple[int, ...]

    def cov(self, g: str, pair_p: tuple, h: str, pair_q: tuple) -> float:
        """Cov(U_g over pair_p, U_h over pair_q); exact 0 for disjoint pairs."""
        if pair_p == pair_q:
            if g == h:
                return self.var_x[pair_p] if g == "x" else self.var_y[pair_p]
            return self.cov_xy[pair_p]
        common = set(pair_p) & set(pair_q)
        if not common:
            return 0.0
        # distinct unordered pairs can share at most one index value
        shared = common.pop()
        other_p = pair_p[1] if pair_p[0] == shared else pair_p[0]
        other_q = pair_q[1] if pair_q[0] == shared else pair_q[0]
        return _cov_shared_index(
            self, g, h, shared, other_p, other_q
        )


def _cov_shared_index(nms: NullMomentSet, g, h, s, e, f) -> float:
    """Closed form for Cov(U_g^(s,e), U_h^(s,f)) with the shared index first."""
    m, n, sizes = nms.m_counts, nms.n_counts, nms.sizes
    d_se = 1 if s == e else 0
    d_sf = 1 if s == f else 0
    c_e = (m[e] - d_se) if g == "x" else (n[e] - d_se)
    c_f = (m[f] - d_sf) if h == "x" else (n[f] - d_sf)
    sign = 1.0 if g == h else -1.0
    return (
        sign
        * (1 + d_se + d_sf)
        * m[s]
        * n[s]
        * c_e
        * c_f
        / (sizes[s] - 1 - d_se - d_sf)
        * nms.bm.v1(s, e, f)
    )


def _var_same_pair(own_a, own_b, oth_a, oth_b, delta, big_a, big_b, v2, v1_abb, v1_baa):
    """Var of one group's rank sum over pair (a,b); 'own' counts belong to
    that group, 'oth' to the other.  Mirrored calls give the other group's
    variance with the identical arithmetic, which keeps X<->Y relabeling an
    exact (bitwise) symmetry."""
    t_ab = oth_a * (own_b - 1 - delta) * (big_b - delta) * v1_abb
    t_ba = oth_b * (own_a - 1 - delta) * (big_a - delta) * v1_baa
    pref = (1 + delta) * own_a * (own_b - delta) / (
        (big_a - 1 - delta) * (big_b - 1 - 2 * delta)
    )
    return pref * (oth_a * (oth_b - delta) * v2 + t_ab + t_ba)


def null_moment_set(bm: BlockMoments, pairs, m_counts, n_counts, sizes) -> NullMomentSet:
    """Evaluate every mean/variance/covariance display for the valid pairs.

    Raises
    ------
    InsufficientPatternSizeError
        If any pattern has fewer than 2 rows in either group (the closed
        forms require min{m_a, n_a} >= 2; default filtering guarantees it).
    """
    for a in range(len(sizes)):
        if min(m_counts[a], n_counts[a]) < 2:
            raise InsufficientPatternSizeError(
                f"pattern {a} has m={m_counts[a]}, n={n_counts[a]}; "
                "the null moments require at least 2 rows per group per pattern"
            )
    m, n, big = m_counts, n_counts, sizes
    mu_x, mu_y, var_x, var_y, cov_xy = {}, {}, {}, {}, {}
    for a, b in pairs:
        d = 1 if a == b else 0
        r0 = bm.r0[(a, b)]
        mu_x[(a, b)] = m[a] * (m[b] - d) * r0
        mu_y[(a, b)] = n[a] * (n[b] - d) * r0
        v2 = bm.v2(a, b)
        v1_abb = bm.v1(a, b, b)
        v1_baa = bm.v1(b, a, a)
        var_x[(a, b)] = _var_same_pair(
            m[a], m[b], n[a], n[b], d, big[a], big[b], v2, v1_abb, v1_baa
        )
        var_y[(a, b)] = _var_same_pair(
            n[a], n[b], m[a], m[b], d, big[a], big[b], v2, v1_abb, v1_baa
        )
        pref = (1 + d) * m[a] * n[a] * (m[b] - d) * (n[b] - d) / (
            (big[a] - 1 - d) * (big[b] - 1 - 2 * d)
        )
        cov_xy[(a, b)] = pref * (
            v2 - (big[b] - d) * v1_abb - (big[a] - d) * v1_baa
        )
    return NullMomentSet(
        pairs=tuple(sorted(pairs)),
        mu_x=mu_x,
        mu_y=mu_y,
        var_x=var_x,
        var_y=var_y,
        cov_xy=cov_xy,
        bm=bm,
        m_counts=tuple(m_counts),
        n_counts=tuple(n_counts),
        sizes=tuple(sizes),
    )


def assemble_sigma_v(nms: NullMomentSet):
    """Mean vector and covariance of the stacked per-pair rank sums.

    Components follow lexicographic pair order, (Ux, Uy) within each pair.
    Returns (mu, sigma, labels).
    """
    pairs = nms.pairs
    dim = 2 * len(pairs)
    mu = np.empty(dim)
    sigma = np.empty((dim, dim))
    labels = []
    for i, pair in enumerate(pairs):
        mu[2 * i] = nms.mu_x[pair]
        mu[2 * i + 1] = nms.mu_y[pair]
        labels.append(f"Ux{pair}")
        labels.append(f"Uy{pair}")
    groups = ("x", "y")
    for i, pair_p in enumerate(pairs):
        for j, pair_q in enumerate(pairs):
            for gi, g in enumerate(groups):
                for hi, h in enumerate(groups):
                    sigma[2 * i + gi, 2 * j + hi] = nms.cov(g, pair_p, h, pair_q)
    return mu, sigma, labels


def pair_weight(pair) -> float:
    """Multiplicity of a valid pair inside the within-group double sum.

    The aggregated Ux equals sum_i sum_j R_ij over all X rows, so a
    cross-pattern pair contributes through both of its mirrored blocks
    while a within-pattern pair contributes once.
    """
    return 1.0 if pair[0] == pair[1] else 2.0


def assemble_sigma_c(nms: NullMomentSet):
    """Mean pair and 2x2 covariance of the aggregated (Ux, Uy).

    Aggregation takes the within-group double sums, so cross-pattern
    components carry weight two. Scaling by two is exact, and all
    reductions use exactly rounded summation so results do not depend
    on iteration order.
    """
    pairs = nms.pairs
    mu = np.array(
        [
            fsum(pair_weight(p) * nms.mu_x[p] for p in pairs),
            fsum(pair_weight(p) * nms.mu_y[p] for p in pairs),
        ]
    )
    sigma = np.empty((2, 2))
    combos = {("x", "x"): (0, 0), ("x", "y"): (0, 1), ("y", "y"): (1, 1)}
    for (g, h), (r, c) in combos.items():
        total = fsum(
            pair_weight(p) * pair_weight(q) * nms.cov(g, p, h, q)
            for p in pairs
            for q in pairs
        )
        sigma[r, c] = total
        sigma[c, r] = total
    return mu, sigma
