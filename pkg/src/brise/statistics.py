"""Test statistics, chi-square inference, and asymptotic-condition diagnostics.

Two statistics share one machinery: the vectorized form is a quadratic form
of all per-pair centered rank sums (2|I| components), the congregated form
aggregates them into a single (Ux, Uy) pair first.  Both divide by the
closed-form null covariance and refer the value to a chi-square upper tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import fsum

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaincc

from .errors import SingularCovarianceError
from .moments import (
    BlockMoments,
    NullMomentSet,
    assemble_sigma_c,
    assemble_sigma_v,
    pair_weight,
)
from .rankgraph import RankMatrix

__all__ = [
    "TestResult",
    "QuadForm",
    "StatisticEngine",
    "chi_square_tail",
    "asymptotic_diagnostics",
    "METHOD_VECTORIZED",
    "METHOD_CONGREGATED",
]

METHOD_VECTORIZED = "BRISE-v"
METHOD_CONGREGATED = "BRISE-c"

#: Relative eigenvalue threshold of the degeneracy policy.
EIGEN_DROP_RTOL = 1e-10


def chi_square_tail(t: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularized upper
    incomplete gamma function."""
    if t <= 0.0:
        return 1.0
    return float(gammaincc(df / 2.0, t / 2.0))


@dataclass
class TestResult:
    """Outcome of one test run; ``to_json_dict`` matches the documented JSON."""

    __test__ = False  # not a pytest class, despite the name

    method: str
    statistic: float
    df: int
    p_value: float
    inference: str
    k: int
    n_patterns: int
    pattern_counts: list
    dropped_components: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "inference": self.inference,
            "k": self.k,
            "n_patterns": self.n_patterns,
            "pattern_counts": self.pattern_counts,
            "dropped_components": self.dropped_components,
            "warnings": self.warnings,
        }


class QuadForm:
    """Quadratic form v -> v' S^{-1} v with a deterministic degeneracy policy.

    2x2 matrices use the closed-form inverse (the expression is arranged so
    that swapping both coordinates and the matrix conformably returns the
    bitwise-identical value, which makes X<->Y relabeling exact).  Larger
    matrices try a Cholesky factorization; if the matrix is not positive
    definite, eigendirections below EIGEN_DROP_RTOL times the largest
    eigenvalue are dropped, the form is evaluated on the retained subspace,
    and the degrees of freedom shrink to the retained rank.
    """

    def __init__(self, sigma: np.ndarray, labels: list[str]):
        sigma = np.asarray(sigma, dtype=np.float64)
        self.dim = sigma.shape[0]
        self.labels = list(labels)
        self.dropped: list[str] = []
        self.warnings: list[str] = []
        self._mode = None
        self._resolve(sigma)

    def _resolve(self, sigma: np.ndarray) -> None:
        if self.dim == 2:
            a, b, c = sigma[0, 0], sigma[0, 1], sigma[1, 1]
            det = a * c - b * b
            if a > 0.0 and det > 0.0:
                self._mode = "closed2"
                self._abc = (a, b, c, det)
                self.df = 2
                return
        else:
            try:
                chol = np.linalg.cholesky(sigma)
            except np.linalg.LinAlgError:
                pass
            else:
                self._mode = "cholesky"
                self._chol = chol
                self.df = self.dim
                return
        self._eigen_fallback(sigma)

    def _eigen_fallback(self, sigma: np.ndarray) -> None:
        eigvals, eigvecs = np.linalg.eigh(sigma)
        top = eigvals[-1]
        if not np.isfinite(top) or top <= 0.0:
            raise SingularCovarianceError(
                "null covariance has no positive eigenvalue; "
                "the rank structure is fully degenerate"
            )
        keep = eigvals > EIGEN_DROP_RTOL * top
        if not keep.any():
            raise SingularCovarianceError("all eigendirections fell below tolerance")
        self._mode = "eigen"
        self._eigvals = eigvals[keep]
        self._basis = eigvecs[:, keep]
        self.df = int(keep.sum())
        for j in np.flatnonzero(~keep):
            dominant = int(np.argmax(np.abs(eigvecs[:, j])))
            self.dropped.append(self.labels[dominant])
        self.warnings.append(
            f"covariance not positive definite; dropped {int((~keep).sum())} "
            f"eigendirection(s), retained rank {self.df}"
        )

    def value(self, v: np.ndarray) -> float:
        if self._mode == "closed2":
            a, b, c, det = self._abc
            u, w = v[0], v[1]
            t1 = u * (c * u - b * w)
            t2 = w * (a * w - b * u)
            return (t1 + t2) / det
        if self._mode == "cholesky":
            y = solve_triangular(self._chol, v, lower=True)
            return float(y @ y)
        y = self._basis.T @ v
        return float(np.sum(y * y / self._eigvals))


class StatisticEngine:
    """Shared per-dataset machinery: rank sums for arbitrary labelings and
    the two quadratic-form statistics against the pattern-wise null moments.

    Works on an arranged layout where each pattern occupies a contiguous row
    slice; ``is_y`` vectors index that layout.
    """

    def __init__(self, R: RankMatrix, offsets: np.ndarray, nms: NullMomentSet):
        self.R = R
        self.offsets = np.asarray(offsets)
        self.nms = nms
        self.pairs = nms.pairs
        self._weights = np.array([pair_weight(p) for p in nms.pairs])
        self.mu_v, self.sigma_v, self.labels_v = assemble_sigma_v(nms)
        self.mu_c, self.sigma_c = assemble_sigma_c(nms)
        self._qf: dict[str, QuadForm] = {}
        self._rows = tuple(
            np.arange(self.offsets[a], self.offsets[a + 1])
            for a in range(len(self.offsets) - 1)
        )

    def u_vector(self, is_y: np.ndarray) -> np.ndarray:
        """Per-pair (Ux, Uy) rank sums for a labeling, in component order."""
        x_rows = tuple(rows[~is_y[rows]] for rows in self._rows)
        y_rows = tuple(rows[is_y[rows]] for rows in self._rows)
        out = np.empty(2 * len(self.pairs))
        values = self.R.values
        for i, (a, b) in enumerate(self.pairs):
            out[2 * i] = values[np.ix_(x_rows[a], x_rows[b])].sum()
            out[2 * i + 1] = values[np.ix_(y_rows[a], y_rows[b])].sum()
        return out

    def aggregate(self, u: np.ndarray) -> np.ndarray:
        """Collapse the per-pair sums to the global (Ux, Uy) pair.

        The pair equals the within-group double sums over the full rank
        matrix, so cross-pattern components enter twice (their block and
        its mirror); doubling is exact in floating point.
        """
        w = self._weights
        return np.array([fsum(w * u[0::2]), fsum(w * u[1::2])])

    def quad_form(self, method: str) -> QuadForm:
        if method not in self._qf:
            if method == METHOD_VECTORIZED:
                self._qf[method] = QuadForm(self.sigma_v, self.labels_v)
            elif method == METHOD_CONGREGATED:
                self._qf[method] = QuadForm(self.sigma_c, ["Ux", "Uy"])
            else:
                raise ValueError(f"unknown method {method!r}")
        return self._qf[method]

    def statistic(self, method: str, u: np.ndarray) -> float:
        """Statistic value for a per-pair U vector under the null moments."""
        qf = self.quad_form(method)
        if method == METHOD_VECTORIZED:
            return qf.value(u - self.mu_v)
        return qf.value(self.aggregate(u) - self.mu_c)


def asymptotic_diagnostics(
    R: RankMatrix,
    bm: BlockMoments,
    sizes,
    report_ids=None,
) -> dict:
    """Advisory report on the chi-square convergence conditions.

    Emits the LHS/RHS ratio of each condition per applicable index
    combination plus the minimum eigenvalue of each cross-pattern
    second-order dependence matrix; never raises or blocks a test.
    Pattern indices in the report use ``report_ids`` (defaults to identity).
    """
    n_pat = len(sizes)
    if report_ids is None:
        report_ids = list(range(n_pat))
    ordered = []
    for a, b in R.pairs:
        ordered.append((a, b))
        if a != b:
            ordered.append((b, a))
    ordered.sort()

    warnings: list[str] = []
    notes: list[str] = []

    def ratio(lhs: float, rhs: float, label: str) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.float64(lhs) / np.float64(rhs)
        if not np.isfinite(r):
            warnings.append(f"{label}: ratio undefined (lhs={lhs:.3g}, rhs={rhs:.3g})")
        return float(r)

    conditions: dict[str, list] = {str(i): [] for i in range(1, 7)}
    for a, b in ordered:
        na, nb = sizes[a], sizes[b]
        block = R.block(a, b)
        pair_ids = [report_ids[a], report_ids[b]]
        r2 = bm.r2sq[(a, b)]
        v1_abb = bm.v1(a, b, b)
        tilde = bm.centered[(a, b)]

        lhs1 = float(np.sqrt(bm.r1sq_at(a, b, b)))
        conditions["1"].append(
            {"pair": pair_ids, "ratio": ratio(lhs1, float(np.sqrt(r2)), f"condition 1 {pair_ids}")}
        )

        sq = block**2
        row_sq = sq.sum(axis=1)
        lhs2 = float((row_sq**2).sum())
        conditions["2"].append(
            {"pair": pair_ids, "ratio": ratio(lhs2, na**2 * nb * r2**2, f"condition 2 {pair_ids}")}
        )

        lhs34 = float((np.abs(tilde) ** 3).sum())
        conditions["3"].append(
            {"pair": pair_ids, "ratio": ratio(lhs34, (na * v1_abb) ** 1.5, f"condition 3 {pair_ids}")}
        )
        conditions["4"].append(
            {
                "pair": pair_ids,
                "ratio": ratio(lhs34, na * float(np.sqrt(r2)) * v1_abb, f"condition 4 {pair_ids}"),
            }
        )

        col_sq = sq.sum(axis=0)
        gram = block @ block.T
        lhs6 = float((gram**2).sum() - (row_sq**2).sum() - (col_sq**2).sum() + (sq**2).sum())
        conditions["6"].append(
            {"pair": pair_ids, "ratio": ratio(lhs6, na**2 * nb**2 * r2**2, f"condition 6 {pair_ids}")}
        )

        # condition 5 couples (a,b) with every (b,g) block
        for g in range(n_pat):
            if (min(b, g), max(b, g)) not in R.pairs:
                continue
            w = bm.centered[(b, g)]
            mw = block @ w
            lhs5 = float(np.abs((mw**2 - sq @ (w**2)).sum()))
            rhs5 = na * nb**2 * r2 * bm.v1(b, g, g)
            conditions["5"].append(
                {
                    "triple": [report_ids[a], report_ids[b], report_ids[g]],
                    "ratio": ratio(lhs5, rhs5, f"condition 5 {[report_ids[a], report_ids[b], report_ids[g]]}"),
                }
            )

    dependence = []
    for a in range(n_pat):
        partners = sorted(
            b
            for b in range(n_pat)
            if b != a and (min(a, b), max(a, b)) in R.pairs
        )
        if not partners:
            notes.append(
                f"pattern {report_ids[a]}: no distinct overlapping partner; "
                "cross-pattern dependence check degenerates to the single-pattern case"
            )
            continue
        base = bm.r1sq_at(a, a, a)
        mat = np.empty((len(partners), len(partners)))
        for i, b in enumerate(partners):
            for j, g in enumerate(partners):
                mat[i, j] = bm.r1sq_at(a, b, g) - bm.r1sq_at(a, a, b) * bm.r1sq_at(
                    a, a, g
                ) / base
        dependence.append(
            {
                "pattern": report_ids[a],
                "partners": [report_ids[b] for b in partners],
                "min_eigenvalue": float(np.linalg.eigvalsh(mat)[0]),
            }
        )

    return {
        "conditions": conditions,
        "cross_pattern_dependence": dependence,
        "warnings": warnings,
        "notes": notes,
    }
