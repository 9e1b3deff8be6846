"""Feature rankings.

``fc_ranking`` orders features by the absolute difference between their
per-class range-relevance scores (descending). ``ff_ranking`` scores
every unordered feature pair by mean-residue concordance over the
columns with all normal rows concatenated before all malware rows (the
measure is invariant to any ordering shared by both columns).
``alt_ranking`` provides the four baselines; chi-square ranks ascending
(closer to the class mean is better), the rest descending.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureMatrix
from .errors import StatsError
from .stats import (RelevanceScore, anova_f, chi_square_score, cr_relevance,
                    kruskal_wallis_h, mann_whitney_u, nmrs)

METHODS = ("crRelevance", "chi2-normal", "chi2-malware", "anova", "mwu", "kw")
ASCENDING_METHODS = frozenset({"chi2-normal", "chi2-malware"})


def feature_index(feature_id: str) -> int:
    return int(feature_id[1:])


@dataclass
class RankedList:
    """Features ordered best-first under one method's key."""

    method: str
    entries: list[tuple[str, float]]
    _positions: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self._positions = {fid: pos for pos, (fid, _s) in enumerate(self.entries, start=1)}
        if len(self._positions) != len(self.entries):
            raise StatsError("ranked list contains a duplicate feature id")

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return tuple(fid for fid, _s in self.entries)

    def rank_of(self, feature_id: str) -> int:
        return self._positions[feature_id]

    def score_of(self, feature_id: str) -> float:
        return self.entries[self._positions[feature_id] - 1][1]

    def __contains__(self, feature_id: str) -> bool:
        return feature_id in self._positions


@dataclass(frozen=True)
class PairScore:
    pair: tuple[str, str]  # ordered by feature index
    nmrs: float


@dataclass
class PairQueue:
    """Pair scores, descending; ties broken by lowest feature indices."""

    pairs: list[PairScore]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def feature_ids(self) -> set[str]:
        return {fid for p in self.pairs for fid in p.pair}


def _sort_entries(scores: list[tuple[str, float]], ascending: bool) -> list[tuple[str, float]]:
    if ascending:
        return sorted(scores, key=lambda e: (e[1], feature_index(e[0])))
    return sorted(scores, key=lambda e: (-e[1], feature_index(e[0])))


def relevance_table(matrix: FeatureMatrix) -> list[RelevanceScore]:
    """Per-feature range-relevance scores, in matrix column order."""
    return [cr_relevance(matrix.values[:, i], matrix.labels, fid)
            for i, fid in enumerate(matrix.feature_ids)]


def fc_ranking(matrix: FeatureMatrix) -> RankedList:
    scores = [(s.feature_id, s.abs_diff) for s in relevance_table(matrix)]
    return RankedList("crRelevance", _sort_entries(scores, ascending=False))


def ff_ranking(matrix: FeatureMatrix) -> PairQueue:
    """Concordance of every unordered feature pair, highest first."""
    order = np.concatenate([np.flatnonzero(matrix.labels == 0),
                            np.flatnonzero(matrix.labels == 1)])
    cols = matrix.values[order]
    pairs = []
    for i, j in itertools.combinations(range(len(matrix.feature_ids)), 2):
        fid_i, fid_j = matrix.feature_ids[i], matrix.feature_ids[j]
        if feature_index(fid_i) > feature_index(fid_j):
            fid_i, fid_j = fid_j, fid_i
        pairs.append(PairScore((fid_i, fid_j), nmrs(cols[:, i], cols[:, j])))
    pairs.sort(key=lambda p: (-p.nmrs, feature_index(p.pair[0]), feature_index(p.pair[1])))
    return PairQueue(pairs)


def alt_ranking(matrix: FeatureMatrix, method: str) -> RankedList:
    if method not in METHODS or method == "crRelevance":
        raise StatsError(f"unknown baseline ranking method {method!r}")
    scores: list[tuple[str, float]] = []
    for i, fid in enumerate(matrix.feature_ids):
        col = matrix.values[:, i]
        try:
            if method == "chi2-normal":
                score = chi_square_score(col[matrix.labels == 0])
            elif method == "chi2-malware":
                score = chi_square_score(col[matrix.labels == 1])
            elif method == "anova":
                score = anova_f(col, matrix.labels)
            elif method == "mwu":
                u1, u2 = mann_whitney_u(col, matrix.labels)
                score = max(u1, u2)
            else:  # kw
                score = kruskal_wallis_h(col, matrix.labels)
        except StatsError as exc:
            raise StatsError(f"feature {fid}: {exc}") from exc
        scores.append((fid, float(score)))
    return RankedList(method, _sort_entries(scores, method in ASCENDING_METHODS))


def ranking(matrix: FeatureMatrix, method: str) -> RankedList:
    """Dispatch on the six supported methods."""
    if method == "crRelevance":
        return fc_ranking(matrix)
    return alt_ranking(matrix, method)
