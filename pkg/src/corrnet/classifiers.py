"""Classifiers used inside the selection loop, plus cross-validation.

All four are implemented here directly: an entropy decision tree (split
candidates are midpoints between consecutive distinct sorted values),
bootstrap ensembles over it (bagging uses every feature; the forest
samples ceil(sqrt(d)) candidate features per split), and Gaussian naive
Bayes with a variance floor. Training is deterministic given the row
order, the parameters and the seed; prediction ties resolve to the
normal class everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import FeatureMatrix, ClassLabel, LABELS
from .errors import ClassifierError
from .seeding import derive_seed

KINDS = ("tree", "forest", "bagging", "gnb")
GNB_VARIANCE_FLOOR = 1e-9


@dataclass
class TreeParams:
    max_depth: int | None = None   # None = unlimited
    min_samples_split: int = 2
    # split criterion is fixed: information gain on entropy


@dataclass
class ClassifierSpec:
    kind: str = "tree"
    n_estimators: int = 10
    tree: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ClassifierError(f"unknown classifier kind {self.kind!r}")
        if self.n_estimators < 1:
            raise ClassifierError("n_estimators must be at least 1")


@dataclass
class TreeNode:
    """Binary threshold node; a leaf carries label >= 0."""

    label: int = -1
    feature: int = -1          # column index within the model's features
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.label >= 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"label": LABELS[self.label].value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeNode":
        if "label" in obj:
            return cls(label=0 if obj["label"] == "normal" else 1)
        return cls(feature=int(obj["feature"]), threshold=float(obj["threshold"]),
                   left=cls.from_dict(obj["left"]), right=cls.from_dict(obj["right"]))


@dataclass
class TreeModel:
    feature_ids: tuple[str, ...]
    root: TreeNode
    kind: str = "tree"


@dataclass
class EnsembleModel:
    feature_ids: tuple[str, ...]
    trees: list[TreeNode]
    seed: int
    kind: str = "forest"


@dataclass
class GnbModel:
    feature_ids: tuple[str, ...]
    priors: np.ndarray      # (2,)
    means: np.ndarray       # (2, d)
    variances: np.ndarray   # (2, d), floored
    kind: str = "gnb"


TrainedModel = TreeModel | EnsembleModel | GnbModel


def _entropy_of_fraction(p: np.ndarray) -> np.ndarray:
    # binary entropy with 0*log(0) = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1.0 - p) * np.log2(1.0 - p))
    return np.nan_to_num(h, nan=0.0)


def _best_split(X: np.ndarray, y: np.ndarray,
                columns: np.ndarray) -> tuple[int, float, float] | None:
    """Best (column, threshold, gain) over the given columns, or None.

    Gain ties resolve to the lowest column then the lowest threshold;
    thresholds are midpoints between consecutive distinct sorted values.
    """
    m = len(y)
    if m < 2 or not len(columns):
        return None
    sub = X[:, columns]
    order = np.argsort(sub, axis=0, kind="stable")
    sv = np.take_along_axis(sub, order, axis=0)
    sy = y[order]
    ones = np.cumsum(sy, axis=0, dtype=np.int64)
    total_ones = ones[-1]

    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    ones_left = ones[:-1].astype(np.float64)
    ones_right = total_ones[None, :] - ones_left

    h_parent = float(_entropy_of_fraction(np.asarray([total_ones[0] / m]))[0])
    child = (n_left * _entropy_of_fraction(ones_left / n_left)
             + n_right * _entropy_of_fraction(ones_right / n_right)) / m
    gain = h_parent - child
    gain[sv[1:] == sv[:-1]] = -np.inf  # only cut between distinct values

    flat = np.argmax(gain.T)  # column-major: lowest column, then lowest cut
    col_pos, cut = divmod(flat, m - 1)
    best_gain = float(gain[cut, col_pos])
    if not math.isfinite(best_gain) or best_gain <= 0.0:
        return None
    lo, hi = float(sv[cut, col_pos]), float(sv[cut + 1, col_pos])
    threshold = (lo + hi) / 2.0
    if threshold >= hi:  # adjacent floats can round the midpoint up
        threshold = lo
    return int(columns[col_pos]), threshold, best_gain


def _majority(y: np.ndarray) -> int:
    ones = int(y.sum())
    return 1 if ones * 2 > len(y) else 0  # tie -> normal


def _grow(X: np.ndarray, y: np.ndarray, depth: int, params: TreeParams,
          rng: np.random.Generator | None, max_features: int | None) -> TreeNode:
    m, d = X.shape
    ones = int(y.sum())
    if ones == 0 or ones == m:
        return TreeNode(label=int(y[0]))
    if m < params.min_samples_split or (params.max_depth is not None
                                        and depth >= params.max_depth):
        return TreeNode(label=_majority(y))
    if max_features is not None and max_features < d:
        columns = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        columns = np.arange(d)
    split = _best_split(X, y, columns)
    if split is None:
        return TreeNode(label=_majority(y))
    feature, threshold, _gain = split
    mask = X[:, feature] <= threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_grow(X[mask], y[mask], depth + 1, params, rng, max_features),
        right=_grow(X[~mask], y[~mask], depth + 1, params, rng, max_features),
    )


def _design(matrix: FeatureMatrix, features: Sequence[str] | None) -> tuple[np.ndarray, tuple[str, ...]]:
    feature_ids = tuple(features) if features is not None else matrix.feature_ids
    cols = [matrix.feature_index(fid) for fid in feature_ids]
    return matrix.values[:, cols], feature_ids


def train_tree(matrix: FeatureMatrix, features: Sequence[str] | None = None,
               params: TreeParams | None = None) -> TreeModel:
    if matrix.n_rows == 0:
        raise ClassifierError("cannot train on an empty matrix")
    params = params or TreeParams()
    if params.min_samples_split < 2:
        raise ClassifierError("min_samples_split must be at least 2")
    X, feature_ids = _design(matrix, features)
    root = _grow(X, matrix.labels.astype(np.int64), 0, params, None, None)
    return TreeModel(feature_ids=feature_ids, root=root)


def train_ensemble(matrix: FeatureMatrix, features: Sequence[str] | None,
                   kind: str, n_estimators: int = 10, seed: int = 0,
                   params: TreeParams | None = None) -> EnsembleModel:
    if kind not in ("forest", "bagging"):
        raise ClassifierError(f"unknown ensemble kind {kind!r}")
    if n_estimators < 1:
        raise ClassifierError("n_estimators must be at least 1")
    if matrix.n_rows == 0:
        raise ClassifierError("cannot train on an empty matrix")
    params = params or TreeParams()
    if params.min_samples_split < 2:
        raise ClassifierError("min_samples_split must be at least 2")
    X, feature_ids = _design(matrix, features)
    y = matrix.labels.astype(np.int64)
    d = X.shape[1]
    max_features = max(1, math.ceil(math.sqrt(d))) if kind == "forest" else None
    trees = []
    for member in range(n_estimators):
        rng = np.random.default_rng(derive_seed(seed, "member", member))
        sample = rng.integers(0, len(y), size=len(y))
        trees.append(_grow(X[sample], y[sample], 0, params,
                           rng if kind == "forest" else None, max_features))
    return EnsembleModel(feature_ids=feature_ids, trees=trees, seed=seed, kind=kind)


def train_gnb(matrix: FeatureMatrix, features: Sequence[str] | None = None) -> GnbModel:
    if matrix.n_rows == 0:
        raise ClassifierError("cannot train on an empty matrix")
    X, feature_ids = _design(matrix, features)
    priors = np.empty(2)
    means = np.zeros((2, X.shape[1]))
    variances = np.full((2, X.shape[1]), GNB_VARIANCE_FLOOR)
    for code in (0, 1):
        rows = X[matrix.labels == code]
        priors[code] = len(rows) / len(X)
        if len(rows):
            means[code] = rows.mean(axis=0)
            variances[code] = np.maximum(rows.var(axis=0), GNB_VARIANCE_FLOOR)
    return GnbModel(feature_ids=feature_ids, priors=priors, means=means,
                    variances=variances)


def train(spec: ClassifierSpec, matrix: FeatureMatrix,
          features: Sequence[str] | None = None, seed: int = 0) -> TrainedModel:
    if spec.kind == "tree":
        return train_tree(matrix, features, spec.tree)
    if spec.kind in ("forest", "bagging"):
        return train_ensemble(matrix, features, spec.kind, spec.n_estimators,
                              seed, spec.tree)
    return train_gnb(matrix, features)


def _route(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.int64)
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if not len(idx):
            continue
        if node.is_leaf:
            out[idx] = node.label
            continue
        mask = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def predict_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Class codes for rows whose columns follow model.feature_ids."""
    if model.kind == "tree":
        return _route(model.root, X)
    if model.kind in ("forest", "bagging"):
        votes = np.zeros(len(X), dtype=np.int64)
        for tree in model.trees:
            votes += _route(tree, X)
        return (votes * 2 > len(model.trees)).astype(np.int64)  # tie -> normal
    log_post = np.empty((len(X), 2))
    for code in (0, 1):
        var = model.variances[code]
        log_like = -0.5 * (np.log(2.0 * np.pi * var)
                           + (X - model.means[code]) ** 2 / var).sum(axis=1)
        prior = model.priors[code]
        log_prior = np.log(prior) if prior > 0 else -np.inf
        log_post[:, code] = log_prior + log_like
    return (log_post[:, 1] > log_post[:, 0]).astype(np.int64)  # tie -> normal


def predict(model: TrainedModel, row: Mapping[str, float]) -> ClassLabel:
    """Label one feature row given as a mapping of feature id to value."""
    missing = [fid for fid in model.feature_ids if fid not in row]
    if missing:
        raise ClassifierError(f"row is missing features: {', '.join(missing)}")
    X = np.asarray([[float(row[fid]) for fid in model.feature_ids]])
    return LABELS[int(predict_batch(model, X)[0])]


def model_accuracy(model: TrainedModel, matrix: FeatureMatrix) -> float:
    cols = [matrix.feature_index(fid) for fid in model.feature_ids]
    pred = predict_batch(model, matrix.values[:, cols])
    return float(np.mean(pred == matrix.labels)) if matrix.n_rows else 0.0


def model_to_json(model: TrainedModel) -> str:
    if model.kind == "tree":
        obj = {"kind": "tree", "features": list(model.feature_ids),
               "root": model.root.to_dict()}
    elif model.kind in ("forest", "bagging"):
        obj = {"kind": model.kind, "features": list(model.feature_ids),
               "seed": model.seed, "trees": [t.to_dict() for t in model.trees]}
    else:
        obj = {"kind": "gnb", "features": list(model.feature_ids),
               "priors": model.priors.tolist(), "means": model.means.tolist(),
               "variances": model.variances.tolist()}
    return json.dumps(obj)


def model_from_json(text: str) -> TrainedModel:
    obj = json.loads(text)
    kind = obj["kind"]
    feature_ids = tuple(obj["features"])
    if kind == "tree":
        return TreeModel(feature_ids, TreeNode.from_dict(obj["root"]))
    if kind in ("forest", "bagging"):
        return EnsembleModel(feature_ids, [TreeNode.from_dict(t) for t in obj["trees"]],
                             seed=int(obj["seed"]), kind=kind)
    if kind == "gnb":
        return GnbModel(feature_ids, np.asarray(obj["priors"]),
                        np.asarray(obj["means"]), np.asarray(obj["variances"]))
    raise ClassifierError(f"unknown model kind {kind!r}")


@dataclass
class CvReport:
    kind: str
    features: tuple[str, ...]
    fold_accuracies: list[float]
    mean_accuracy: float
    seed: int
    precision: float  # malware as the positive class, pooled over folds
    recall: float


def cross_validate(matrix: FeatureMatrix, features: Sequence[str] | None,
                   spec: ClassifierSpec, k: int = 10, seed: int = 0) -> CvReport:
    """Stratified k-fold accuracy; folds and member seeds derive from seed."""
    from .dataset import stratified_kfold

    feature_ids = tuple(features) if features is not None else matrix.feature_ids
    plan = stratified_kfold(matrix, k, derive_seed(seed, "cv-folds"))
    cols = [matrix.feature_index(fid) for fid in feature_ids]
    accs = []
    tp = fp = fn = 0
    for fold in range(k):
        train_part = matrix.take(plan.train_rows(fold))
        model = train(spec, train_part, feature_ids, derive_seed(seed, "cv-train", fold))
        test_rows = plan.test_rows(fold)
        pred = predict_batch(model, matrix.values[np.ix_(test_rows, cols)])
        truth = matrix.labels[test_rows]
        accs.append(float(np.mean(pred == truth)))
        tp += int(np.count_nonzero((pred == 1) & (truth == 1)))
        fp += int(np.count_nonzero((pred == 1) & (truth == 0)))
        fn += int(np.count_nonzero((pred == 0) & (truth == 1)))
    return CvReport(
        kind=spec.kind,
        features=feature_ids,
        fold_accuracies=accs,
        mean_accuracy=float(np.mean(accs)),
        seed=seed,
        precision=tp / (tp + fp) if tp + fp else 0.0,
        recall=tp / (tp + fn) if tp + fn else 0.0,
    )
