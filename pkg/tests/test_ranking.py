import numpy as np
import pytest

from conftest import make_matrix
from corrnet.dataset import FEATURE_IDS, FeatureMatrix
from corrnet.errors import StatsError
from corrnet.ranking import (METHODS, alt_ranking, fc_ranking, ff_ranking,
                             ranking, relevance_table)


def sixteen_feature_matrix(seed=0, n=40):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0, 100, size=(n, 16))
    labels = np.asarray([0, 1] * (n // 2), dtype=np.uint8)
    return FeatureMatrix(FEATURE_IDS, values, labels,
                         tuple(f"r{i}" for i in range(n)))


def test_fc_ranking_prefers_asymmetric_separation():
    # F1: normal is one clean run, malware fragmented by it -> large diff
    # F2: both classes perfectly separated -> both scores 1, diff 0
    matrix = make_matrix({
        "F1": [10, 11, 12, 13, 1, 2, 20, 21],
        "F2": [1, 2, 3, 4, 11, 12, 13, 14],
    }, ["n", "n", "n", "n", "m", "m", "m", "m"])
    ranked = fc_ranking(matrix)
    assert ranked.feature_ids[0] == "F1"
    assert ranked.score_of("F2") == 0.0


def test_constant_feature_ranks_behind_informative_one():
    matrix = make_matrix({
        "F1": [1, 2, 3, 10, 11, 12],   # perfectly separating
        "F2": [7, 7, 7, 7, 7, 7],      # constant: every value mixed
    }, ["n", "n", "n", "m", "m", "m"])
    table = {s.feature_id: s for s in relevance_table(matrix)}
    assert table["F2"].score_normal == 0.0
    assert table["F2"].score_malware == 0.0
    ranked = fc_ranking(matrix)
    assert ranked.feature_ids[0] == "F1"  # tie at 0 broken by index


def test_identical_class_multisets_rank_last():
    matrix = make_matrix({
        "F1": [1, 2, 5, 6, 1, 2, 5, 6],    # same multiset per class
        "F2": [10, 11, 12, 13, 2, 3, 40, 41],
    }, ["n", "n", "n", "n", "m", "m", "m", "m"])
    ranked = fc_ranking(matrix)
    assert ranked.feature_ids[-1] == "F1"
    assert ranked.score_of("F1") == 0.0


def test_fc_ranking_row_shuffle_invariance():
    matrix = sixteen_feature_matrix(seed=3)
    rng = np.random.default_rng(9)
    perm = rng.permutation(matrix.n_rows)
    shuffled = FeatureMatrix(matrix.feature_ids, matrix.values[perm].copy(),
                             matrix.labels[perm].copy(),
                             tuple(matrix.flow_ids[i] for i in perm))
    assert fc_ranking(matrix).entries == fc_ranking(shuffled).entries


def test_ranked_list_is_permutation_with_consistent_positions():
    for method in METHODS:
        ranked = ranking(sixteen_feature_matrix(seed=1), method)
        assert sorted(ranked.feature_ids) == sorted(FEATURE_IDS)
        for pos, (fid, _score) in enumerate(ranked.entries, start=1):
            assert ranked.rank_of(fid) == pos


def test_ff_ranking_pair_count():
    queue = ff_ranking(sixteen_feature_matrix())
    assert len(queue) == 120  # C(16, 2)
    assert len({p.pair for p in queue}) == 120


def test_ff_ranking_three_features():
    matrix = make_matrix({"F1": [1, 2, 3, 4], "F2": [4, 3, 2, 1],
                          "F3": [1, 1, 2, 2]}, ["n", "n", "m", "m"])
    queue = ff_ranking(matrix)
    assert len(queue) == 3


def test_duplicated_column_ranks_first_with_score_one():
    rng = np.random.default_rng(2)
    base = rng.uniform(0, 9, size=12)
    matrix = make_matrix({"F1": base, "F2": base.copy(),
                          "F3": rng.uniform(0, 9, size=12)},
                         ["n"] * 6 + ["m"] * 6)
    queue = ff_ranking(matrix)
    assert queue.pairs[0].pair == ("F1", "F2")
    assert queue.pairs[0].nmrs == 1.0


def test_ff_scores_invariant_to_class_block_order():
    rng = np.random.default_rng(4)
    values = rng.uniform(0, 50, size=(20, 3))
    labels_a = np.asarray([0] * 10 + [1] * 10, dtype=np.uint8)
    a = FeatureMatrix(("F1", "F2", "F3"), values, labels_a,
                      tuple(f"r{i}" for i in range(20)))
    # same rows, malware block first in ingestion order
    reordered = np.concatenate([np.arange(10, 20), np.arange(0, 10)])
    b = FeatureMatrix(("F1", "F2", "F3"), values[reordered].copy(),
                      labels_a[reordered].copy(),
                      tuple(f"r{i}" for i in reordered))
    scores_a = {p.pair: p.nmrs for p in ff_ranking(a)}
    scores_b = {p.pair: p.nmrs for p in ff_ranking(b)}
    for pair, score in scores_a.items():
        assert scores_b[pair] == pytest.approx(score, abs=1e-12)


def test_alt_ranking_sort_directions():
    matrix = sixteen_feature_matrix(seed=7, n=60)
    chi = alt_ranking(matrix, "chi2-normal")
    scores = [s for _f, s in chi.entries]
    assert scores == sorted(scores)  # ascending: lower disparity is better
    for method in ("anova", "mwu", "kw"):
        ranked = alt_ranking(matrix, method)
        scores = [s for _f, s in ranked.entries]
        assert scores == sorted(scores, reverse=True)


def test_alt_ranking_chi2_uses_single_class_column():
    matrix = make_matrix({
        "F1": [5, 5, 5, 1, 9, 100],   # constant on normal rows
        "F2": [1, 2, 3, 1, 2, 3],
    }, ["n", "n", "n", "m", "m", "m"])
    ranked = alt_ranking(matrix, "chi2-normal")
    assert ranked.feature_ids[0] == "F1"
    assert ranked.score_of("F1") == 0.0


def test_alt_ranking_error_names_feature():
    matrix = make_matrix({
        "F1": [1, 2, 3, 4],
        "F2": [3, 3, 3, 3],   # all tied -> kw undefined
    }, ["n", "n", "m", "m"])
    with pytest.raises(StatsError) as exc:
        alt_ranking(matrix, "kw")
    assert "F2" in str(exc.value)


def test_unknown_method_rejected():
    with pytest.raises(StatsError):
        alt_ranking(sixteen_feature_matrix(), "pearson")
