"""Correlation statistics over scenario sweeps.

Everything here consumes paired scenario-level series: the dependence
metric on one axis and an observable (win rate) or a bound value on the
other. P-values come from two-sided permutation tests, exact by full
enumeration for very short series and seeded Monte Carlo otherwise, so
reruns reproduce every digit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .metrics import BoundReport
from .numkit import Rng

__all__ = [
    "PairedSeries",
    "CorrResult",
    "spearman",
    "kendall",
    "pearson",
    "fit_line",
    "sweep_table",
]

_EXACT_MAX_N = 7
_DEFAULT_PERMUTATIONS = 10_000
# float slack when comparing a permuted statistic against the observed
# one; keeps exact re-realizations (e.g. sign flips) counted
_P_TIE_EPS = 1e-12


@dataclass(frozen=True)
class PairedSeries:
    """Two equal-length observations over labeled scenarios."""

    labels: tuple
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        labels = tuple(str(l) for l in self.labels)
        if a.ndim != 1 or b.ndim != 1:
            raise ShapeError("series must be 1-d")
        if not (len(labels) == a.size == b.size):
            raise ShapeError(
                f"length mismatch: {len(labels)} labels, {a.size} vs {b.size} values"
            )
        if a.size < 3:
            raise ShapeError(f"need at least 3 scenarios, got {a.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("series entries must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.a.size

    def map_a(self, fn, suffix: str = "") -> "PairedSeries":
        """Transformed copy (e.g. absolute values) keeping the pairing."""
        labels = tuple(l + suffix for l in self.labels)
        return PairedSeries(labels=labels, a=fn(self.a), b=self.b.copy())


@dataclass(frozen=True)
class CorrResult:
    statistic: float
    p_value: float
    method: str
    n: int
    permutations: int


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _centered_unit(values: np.ndarray, label: str) -> np.ndarray:
    c = values - values.mean()
    norm = math.sqrt(float(np.dot(c, c)))
    if norm == 0.0:
        raise DomainError(f"{label} series is constant: statistic undefined")
    return c / norm


def _pearson_stat(a: np.ndarray, b: np.ndarray) -> float:
    r = float(np.dot(_centered_unit(a, "a"), _centered_unit(b, "b")))
    return min(1.0, max(-1.0, r))


def _kendall_concordance(a: np.ndarray) -> np.ndarray:
    return np.sign(a[:, None] - a[None, :])


def _kendall_stat_from_signs(sa: np.ndarray, sb: np.ndarray, denom: float) -> float:
    iu = np.triu_indices(sa.shape[0], k=1)
    s = float(np.sum(sa[iu] * sb[iu]))
    return min(1.0, max(-1.0, s / denom))


def _kendall_denominator(a: np.ndarray, b: np.ndarray) -> float:
    n = a.size
    n0 = n * (n - 1) / 2.0

    def tie_pairs(v: np.ndarray) -> float:
        _, counts = np.unique(v, return_counts=True)
        return float(np.sum(counts * (counts - 1) / 2.0))

    da = n0 - tie_pairs(a)
    db = n0 - tie_pairs(b)
    if da <= 0.0 or db <= 0.0:
        raise DomainError("all-tied series: statistic undefined")
    return math.sqrt(da * db)


def _permutation_p(
    stat_fn, a: np.ndarray, b: np.ndarray, observed: float, permutations: int, seed: int
) -> tuple[float, int]:
    """Two-sided permutation p-value, permuting the second series.

    Exact enumeration over all n! pairings when n is small; otherwise a
    seeded Monte Carlo estimate with the add-one correction.
    """
    n = a.size
    thresh = abs(observed) - _P_TIE_EPS
    if n <= _EXACT_MAX_N:
        total = math.factorial(n)
        hits = 0
        for perm in itertools.permutations(range(n)):
            if abs(stat_fn(a, b[list(perm)])) >= thresh:
                hits += 1
        return hits / total, total
    rng = Rng(seed)
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(n)
        if abs(stat_fn(a, b[perm])) >= thresh:
            hits += 1
    return (1 + hits) / (1 + permutations), permutations


def pearson(
    series: PairedSeries,
    permutations: int = _DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrResult:
    """Product-moment correlation with a permutation p-value."""
    observed = _pearson_stat(series.a, series.b)
    p, used = _permutation_p(
        _pearson_stat, series.a, series.b, observed, permutations, seed
    )
    return CorrResult(observed, p, "pearson", series.n, used)


def spearman(
    series: PairedSeries,
    permutations: int = _DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrResult:
    """Rank correlation: product-moment correlation of midranks."""
    ra = _midranks(series.a)
    rb = _midranks(series.b)
    observed = _pearson_stat(ra, rb)
    # permuting response values permutes their ranks identically
    p, used = _permutation_p(_pearson_stat, ra, rb, observed, permutations, seed)
    return CorrResult(observed, p, "spearman", series.n, used)


def kendall(
    series: PairedSeries,
    permutations: int = _DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrResult:
    """Tie-corrected pairwise concordance (tau-b)."""
    a, b = series.a, series.b
    denom = _kendall_denominator(a, b)
    sa = _kendall_concordance(a)
    sb = _kendall_concordance(b)

    def stat(_a: np.ndarray, bp: np.ndarray) -> float:
        return _kendall_stat_from_signs(sa, _kendall_concordance(bp), denom)

    observed = _kendall_stat_from_signs(sa, sb, denom)
    p, used = _permutation_p(stat, a, b, observed, permutations, seed)
    return CorrResult(observed, p, "kendall", series.n, used)


def fit_line(series: PairedSeries) -> tuple[float, float]:
    """Least-squares line b ~ slope * a + intercept."""
    a, b = series.a, series.b
    am, bm = a.mean(), b.mean()
    ac = a - am
    var = float(np.dot(ac, ac))
    if var == 0.0:
        raise DomainError("constant predictor: line undefined")
    slope = float(np.dot(ac, b - bm)) / var
    return slope, bm - slope * am


def sweep_table(reports: list[BoundReport]) -> dict[str, PairedSeries]:
    """Assemble the correlation-ready series from a scenario sweep.

    Emits, keyed by name: ``emi_wr`` (shifted-side dependence vs win
    rate, all scenarios), ``emid_thm3`` (all scenarios), and
    ``emid_thm2`` / ``emid_partial`` (consistent scenarios only).  A
    series is included only when at least 3 scenarios support it.
    """
    if len(reports) < 3:
        raise ShapeError(f"need at least 3 reports, got {len(reports)}")
    out: dict[str, PairedSeries] = {}

    def add(key, rows):
        if len(rows) >= 3:
            labels, av, bv = zip(*rows)
            out[key] = PairedSeries(labels=labels, a=np.array(av), b=np.array(bv))

    add("emi_wr", [(r.label, r.emi_q, r.wr_q) for r in reports])
    add("emid_thm3", [(r.label, r.emid, r.theorem3.rhs_total) for r in reports])
    add(
        "emid_thm2",
        [(r.label, r.emid, r.theorem2.rhs_total) for r in reports if r.theorem2 is not None],
    )
    add(
        "emid_partial",
        [(r.label, r.emid, r.partial_rhs) for r in reports if r.partial_rhs is not None],
    )
    return out
