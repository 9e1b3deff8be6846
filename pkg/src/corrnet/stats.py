"""Column statistics over (value, label) pairs.

The two measures driving selection:

* class-range relevance: per class, the size of the largest interval of
  the sorted value multiset containing only that class, divided by the
  class size. A value occurring in both classes belongs to no interval
  and splits adjacent runs.
* mean-residue concordance (``nmrs``): shift-invariant similarity in
  [0, 1] between two equal-length vectors,
  ``1 - sum|a_i - a_mean - b_i + b_mean| / (2 * max(S_a, S_b))`` with
  ``S_x = sum|x_i - x_mean|``.

Plus four classical ranking statistics (chi-square against the column
mean, one-way ANOVA F, Mann-Whitney U, Kruskal-Wallis H with tie
correction), each computed exactly as used by the ranking layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import ClassLabel, LABELS, as_label_array
from .errors import StatsError


@dataclass(frozen=True)
class ClassRange:
    lo: float
    hi: float
    label: ClassLabel
    cardinality: int


@dataclass(frozen=True)
class RelevanceScore:
    """Per-class range relevance of one feature."""

    feature_id: str
    score_normal: float
    score_malware: float

    @property
    def abs_diff(self) -> float:
        return abs(self.score_normal - self.score_malware)

    @property
    def best(self) -> float:
        return max(self.score_normal, self.score_malware)


def _as_columns(values: Sequence, labels: Sequence) -> tuple[np.ndarray, np.ndarray]:
    vals = np.asarray(values, dtype=np.float64)
    labs = as_label_array(labels)
    if vals.ndim != 1 or labs.ndim != 1 or vals.shape != labs.shape:
        raise StatsError(
            f"value/label length mismatch: {vals.shape} vs {labs.shape}")
    if vals.size == 0:
        raise StatsError("empty column")
    return vals, labs


def class_ranges(values: Sequence, labels: Sequence) -> list[ClassRange]:
    """Maximal single-class runs of the sorted value multiset.

    Values present in both classes are excluded and terminate the runs
    on either side of them.
    """
    vals, labs = _as_columns(values, labels)
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    l = labs[order]
    is_new = np.empty(v.size, dtype=bool)
    is_new[0] = True
    is_new[1:] = v[1:] != v[:-1]
    gid = np.cumsum(is_new) - 1
    n_groups = int(gid[-1]) + 1
    total = np.bincount(gid, minlength=n_groups)
    malware = np.bincount(gid[l == 1], minlength=n_groups)
    distinct = v[is_new]

    ranges: list[ClassRange] = []
    run_code = -1  # -1: no open run
    run_lo = run_hi = 0.0
    run_card = 0

    def flush():
        nonlocal run_code, run_card
        if run_code >= 0:
            ranges.append(ClassRange(run_lo, run_hi, LABELS[run_code], run_card))
        run_code = -1
        run_card = 0

    for g in range(n_groups):
        mixed = 0 < malware[g] < total[g]
        if mixed:
            flush()
            continue
        code = 1 if malware[g] else 0
        if code == run_code:
            run_hi = float(distinct[g])
            run_card += int(total[g])
        else:
            flush()
            run_code = code
            run_lo = run_hi = float(distinct[g])
            run_card = int(total[g])
    flush()
    return ranges


def cr_relevance(values: Sequence, labels: Sequence, feature_id: str = "") -> RelevanceScore:
    """Per-class score = cardinality of the class's largest run / class size.

    A class with no run scores 0. Both classes must be present.
    """
    vals, labs = _as_columns(values, labels)
    ccard = np.bincount(labs, minlength=2)
    for code, label in enumerate(LABELS):
        if ccard[code] == 0:
            raise StatsError(f"class '{label.value}' is absent from the column")
    best = [0, 0]
    for r in class_ranges(vals, labs):
        code = 0 if r.label is ClassLabel.NORMAL else 1
        if r.cardinality > best[code]:
            best[code] = r.cardinality
    return RelevanceScore(feature_id,
                          score_normal=best[0] / ccard[0],
                          score_malware=best[1] / ccard[1])


def nmrs(a: Sequence, b: Sequence) -> float:
    """Mean-residue concordance of two equal-length vectors, in [0, 1].

    Returns 1.0 when both vectors are constant (zero residue mass).
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise StatsError(f"vector length mismatch: {av.shape} vs {bv.shape}")
    if av.size == 0:
        raise StatsError("empty vectors")
    ra = av - av.mean()
    rb = bv - bv.mean()
    denom = 2.0 * max(np.abs(ra).sum(), np.abs(rb).sum())
    if denom == 0.0:
        return 1.0
    return float(1.0 - np.abs(ra - rb).sum() / denom)


def chi_square_score(values: Sequence) -> float:
    """Sum of (v - E)^2 / E with E = the column mean."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise StatsError("empty column")
    expected = vals.mean()
    if expected == 0.0:
        raise StatsError("chi-square undefined: column mean is zero")
    return float(((vals - expected) ** 2 / expected).sum())


def anova_f(values: Sequence, labels: Sequence) -> float:
    """One-way F statistic for the two class groups (k = 2)."""
    vals, labs = _as_columns(values, labels)
    groups = [vals[labs == 0], vals[labs == 1]]
    for code, label in enumerate(LABELS):
        if groups[code].size == 0:
            raise StatsError(f"class '{label.value}' is absent from the column")
    n = vals.size
    if n < 3:
        raise StatsError(f"ANOVA needs at least 3 observations, got {n}")
    grand = vals.mean()
    msb = sum(g.size * (g.mean() - grand) ** 2 for g in groups) / (2 - 1)
    within = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    msw = within / (n - 2)
    if msw == 0.0:
        raise StatsError("ANOVA undefined: within-group variance is zero")
    return float(msb / msw)


def average_ranks(values: Sequence) -> np.ndarray:
    """1-based ranks over the pooled sample; ties get the mean rank."""
    vals = np.asarray(values, dtype=np.float64)
    n = vals.size
    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    is_new = np.empty(n, dtype=bool)
    is_new[0] = True
    is_new[1:] = sv[1:] != sv[:-1]
    gid = np.cumsum(is_new) - 1
    counts = np.bincount(gid)
    ends = np.cumsum(counts)
    starts = ends - counts
    group_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = group_rank[gid]
    return ranks


def mann_whitney_u(values: Sequence, labels: Sequence) -> tuple[float, float]:
    """(U1, U2) with U_j = R_j - n_j(n_j+1)/2; U1 is the normal class."""
    vals, labs = _as_columns(values, labels)
    n1 = int(np.count_nonzero(labs == 0))
    n2 = int(np.count_nonzero(labs == 1))
    for count, label in ((n1, ClassLabel.NORMAL), (n2, ClassLabel.MALWARE)):
        if count == 0:
            raise StatsError(f"class '{label.value}' is absent from the column")
    ranks = average_ranks(vals)
    r1 = float(ranks[labs == 0].sum())
    r2 = float(ranks[labs == 1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    u2 = r2 - n2 * (n2 + 1) / 2.0
    return u1, u2


def tie_correction(values: Sequence) -> float:
    """1 - sum(t^3 - t) / (N^3 - N) over tie-group sizes t."""
    vals = np.asarray(values, dtype=np.float64)
    n = vals.size
    if n < 2:
        return 1.0
    _, counts = np.unique(vals, return_counts=True)
    t = counts.astype(np.float64)
    return float(1.0 - (t ** 3 - t).sum() / (n ** 3 - n))


def kruskal_wallis_h(values: Sequence, labels: Sequence) -> float:
    """Tie-corrected H over the two class groups."""
    vals, labs = _as_columns(values, labels)
    for code, label in enumerate(LABELS):
        if np.count_nonzero(labs == code) == 0:
            raise StatsError(f"class '{label.value}' is absent from the column")
    n = vals.size
    ranks = average_ranks(vals)
    h = 0.0
    for code in (0, 1):
        group = ranks[labs == code]
        h += group.sum() ** 2 / group.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = tie_correction(vals)
    if correction == 0.0:
        raise StatsError("Kruskal-Wallis undefined: all values tied")
    return float(h / correction)
