import numpy as np
import pytest

from conftest import make_matrix
from corrnet.classifiers import (ClassifierSpec, EnsembleModel, TreeNode,
                                 TreeParams, cross_validate, model_accuracy,
                                 model_from_json, model_to_json, predict,
                                 predict_batch, train, train_ensemble,
                                 train_gnb, train_tree)
from corrnet.dataset import ClassLabel, FeatureMatrix
from corrnet.errors import ClassifierError
from corrnet.seeding import derive_seed


def test_separable_one_feature_tree():
    matrix = make_matrix({"F1": [1.0, 2.0, 8.0, 9.0]}, ["n", "n", "m", "m"])
    model = train_tree(matrix)
    root = model.root
    assert not root.is_leaf
    assert 2.0 < root.threshold < 8.0
    assert root.left.is_leaf and root.right.is_leaf
    assert model_accuracy(model, matrix) == 1.0


def test_identical_rows_mixed_labels_single_leaf_majority():
    matrix = make_matrix({"F1": [5.0, 5.0, 5.0]}, ["m", "m", "n"])
    model = train_tree(matrix)
    assert model.root.is_leaf
    assert model.root.label == 1  # malware majority


def test_majority_tie_predicts_normal():
    matrix = make_matrix({"F1": [5.0, 5.0]}, ["m", "n"])
    model = train_tree(matrix)
    assert model.root.is_leaf and model.root.label == 0


def test_xor_data_needs_depth_two():
    matrix = make_matrix({
        "F1": [0.0, 0.0, 1.0, 1.0],
        "F2": [0.0, 1.0, 0.0, 1.0],
    }, ["n", "m", "m", "n"])
    model = train_tree(matrix)
    assert model_accuracy(model, matrix) == 1.0
    depth_one = train_tree(matrix, params=TreeParams(max_depth=1))
    assert model_accuracy(depth_one, matrix) < 1.0


def test_max_depth_zero_is_single_leaf():
    matrix = make_matrix({"F1": [1.0, 9.0, 2.0]}, ["n", "m", "n"])
    model = train_tree(matrix, params=TreeParams(max_depth=0))
    assert model.root.is_leaf and model.root.label == 0


def test_fully_grown_tree_fits_consistent_data():
    rng = np.random.default_rng(13)
    values = rng.normal(size=(200, 3))
    labels = (values[:, 0] * values[:, 1] > 0).astype(np.uint8)
    matrix = FeatureMatrix(("F1", "F2", "F3"), values, labels,
                           tuple(f"r{i}" for i in range(200)))
    model = train_tree(matrix)
    assert model_accuracy(model, matrix) == 1.0


def test_empty_matrix_rejected():
    empty = FeatureMatrix(("F1",), np.empty((0, 1)), np.empty(0, np.uint8), ())
    with pytest.raises(ClassifierError):
        train_tree(empty)


def test_tree_feature_subset():
    matrix = make_matrix({"F1": [1, 2, 8, 9], "F2": [8, 9, 1, 2]},
                         ["n", "n", "m", "m"])
    model = train_tree(matrix, features=("F2",))
    assert model.feature_ids == ("F2",)
    assert model_accuracy(model, matrix) == 1.0


def test_predict_mapping_and_missing_feature_error():
    matrix = make_matrix({"F1": [1, 2, 8, 9]}, ["n", "n", "m", "m"])
    model = train_tree(matrix)
    assert predict(model, {"F1": 1.5}) is ClassLabel.NORMAL
    assert predict(model, {"F1": 8.5}) is ClassLabel.MALWARE
    with pytest.raises(ClassifierError) as exc:
        predict(model, {"F2": 1.0})
    assert "F1" in str(exc.value)


def test_single_leaf_model_always_predicts_it():
    matrix = make_matrix({"F1": [3.0, 3.0, 3.0]}, ["m", "m", "m"])
    model = train_tree(matrix)
    for v in (-10.0, 3.0, 99.0):
        assert predict(model, {"F1": v}) is ClassLabel.MALWARE


def test_forest_majority_vote_tie_and_majority():
    leaf_m = TreeNode(label=1)
    leaf_n = TreeNode(label=0)
    model = EnsembleModel(("F1",), [leaf_m, leaf_m, leaf_n], seed=0, kind="forest")
    assert predict(model, {"F1": 0.0}) is ClassLabel.MALWARE
    tied = EnsembleModel(("F1",), [leaf_m, leaf_n], seed=0, kind="bagging")
    assert predict(tied, {"F1": 0.0}) is ClassLabel.NORMAL


def test_ensemble_determinism():
    rng = np.random.default_rng(5)
    matrix = make_matrix({"F1": rng.uniform(size=30), "F2": rng.uniform(size=30)},
                         ["n", "m"] * 15)
    a = train_ensemble(matrix, None, "forest", n_estimators=5, seed=11)
    b = train_ensemble(matrix, None, "forest", n_estimators=5, seed=11)
    assert model_to_json(a) == model_to_json(b)
    c = train_ensemble(matrix, None, "forest", n_estimators=5, seed=12)
    assert model_to_json(a) != model_to_json(c)


def test_bagging_identity_bootstrap_equals_plain_tree():
    # distinct values so row order cannot affect the grown tree; search a
    # seed whose bootstrap draw is the identity multiset
    matrix = make_matrix({"F1": [1.0, 2.0, 8.0, 9.0]}, ["n", "n", "m", "m"])
    n = matrix.n_rows
    found = None
    for seed in range(20000):
        rng = np.random.default_rng(derive_seed(seed, "member", 0))
        sample = rng.integers(0, n, size=n)
        if sorted(sample.tolist()) == list(range(n)):
            found = seed
            break
    assert found is not None
    bagged = train_ensemble(matrix, None, "bagging", n_estimators=1, seed=found)
    plain = train_tree(matrix)
    assert bagged.trees[0].to_dict() == plain.root.to_dict()


def test_ensembles_fit_separable_data():
    rng = np.random.default_rng(8)
    n = 60
    values = np.concatenate([rng.uniform(0, 1, n // 2), rng.uniform(5, 6, n // 2)])
    matrix = make_matrix({"F1": values, "F2": rng.uniform(size=n)},
                         ["n"] * (n // 2) + ["m"] * (n // 2))
    for kind in ("forest", "bagging"):
        model = train_ensemble(matrix, None, kind, n_estimators=7, seed=3)
        assert model_accuracy(model, matrix) == 1.0


def test_gnb_tie_predicts_normal_and_shift_invariance():
    matrix = make_matrix({"F1": [0.0, 1.0, 3.0, 4.0]}, ["n", "n", "m", "m"])
    model = train_gnb(matrix)
    assert predict(model, {"F1": 2.0}) is ClassLabel.NORMAL  # equidistant
    assert predict(model, {"F1": 0.5}) is ClassLabel.NORMAL
    assert predict(model, {"F1": 3.5}) is ClassLabel.MALWARE

    shifted = make_matrix({"F1": [100.0, 101.0, 103.0, 104.0]},
                          ["n", "n", "m", "m"])
    shifted_model = train_gnb(shifted)
    for q in (0.5, 2.0, 3.5):
        assert predict(model, {"F1": q}) is predict(shifted_model, {"F1": q + 100.0})


def test_gnb_variance_floor():
    matrix = make_matrix({"F1": [2.0, 2.0, 5.0, 5.0]}, ["n", "n", "m", "m"])
    model = train_gnb(matrix)
    assert (model.variances >= 1e-9).all()
    assert predict(model, {"F1": 2.1}) is ClassLabel.NORMAL


def test_model_json_roundtrip_predictions():
    rng = np.random.default_rng(21)
    matrix = make_matrix({"F1": rng.uniform(size=40), "F2": rng.uniform(size=40)},
                         ["n", "m"] * 20)
    queries = rng.uniform(size=(25, 2))
    for spec in (ClassifierSpec("tree"), ClassifierSpec("forest", 3),
                 ClassifierSpec("bagging", 3), ClassifierSpec("gnb")):
        model = train(spec, matrix, None, seed=4)
        again = model_from_json(model_to_json(model))
        assert np.array_equal(predict_batch(model, queries),
                              predict_batch(again, queries))


def test_invalid_specs_rejected():
    with pytest.raises(ClassifierError):
        ClassifierSpec("svm")
    with pytest.raises(ClassifierError):
        ClassifierSpec("tree", n_estimators=0)
    matrix = make_matrix({"F1": [1.0, 2.0]}, ["n", "m"])
    with pytest.raises(ClassifierError):
        train_ensemble(matrix, None, "boosting")
    with pytest.raises(ClassifierError):
        train_tree(matrix, params=TreeParams(min_samples_split=1))


# -- cross validation ---------------------------------------------------

def separable_matrix(n=120, seed=17):
    rng = np.random.default_rng(seed)
    values = np.concatenate([rng.uniform(0, 1, n // 2), rng.uniform(3, 4, n // 2)])
    return make_matrix({"F1": values, "F2": rng.uniform(size=n)},
                       ["n"] * (n // 2) + ["m"] * (n // 2))


def test_cv_perfect_on_separable():
    report = cross_validate(separable_matrix(), None, ClassifierSpec("tree"),
                            k=10, seed=1)
    assert report.mean_accuracy == 1.0
    assert report.precision == 1.0 and report.recall == 1.0
    assert len(report.fold_accuracies) == 10


def test_cv_mean_is_hand_average():
    report = cross_validate(separable_matrix(n=44), None,
                            ClassifierSpec("gnb"), k=4, seed=9)
    assert report.mean_accuracy == pytest.approx(
        sum(report.fold_accuracies) / len(report.fold_accuracies), abs=1e-15)


def test_cv_determinism():
    matrix = separable_matrix(n=60, seed=2)
    a = cross_validate(matrix, None, ClassifierSpec("forest", 3), k=5, seed=7)
    b = cross_validate(matrix, None, ClassifierSpec("forest", 3), k=5, seed=7)
    assert a.fold_accuracies == b.fold_accuracies


def test_cv_coin_flip_near_half():
    rng = np.random.default_rng(12)
    n = 600
    matrix = make_matrix(
        {"F1": rng.uniform(size=n), "F2": rng.uniform(size=n)},
        ["n" if b else "m" for b in rng.integers(0, 2, size=n)])
    report = cross_validate(matrix, None, ClassifierSpec("tree"), k=10, seed=5)
    assert 0.40 <= report.mean_accuracy <= 0.60
