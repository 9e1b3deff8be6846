"""Labeled feature matrices: CSV persistence, column access, stratified folds.

CSV schema (the extractor's output and every command's input):

    flow_id,F1,...,F16,label

Floats are serialized with at most 9 significant digits in their shortest
form (``%.9g``), which round-trips exactly through parse/serialize; the
label column is lowercase ``normal``/``malware``; UTF-8 with LF endings.
After selection a file may carry a subset of the F-columns, in canonical
order.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DatasetError
from .seeding import derive_seed

FEATURE_IDS: tuple[str, ...] = tuple(f"F{i}" for i in range(1, 17))


class ClassLabel(enum.Enum):
    NORMAL = "normal"
    MALWARE = "malware"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DatasetError(f"unknown class label {text!r}") from None


LABELS = (ClassLabel.NORMAL, ClassLabel.MALWARE)
_LABEL_CODE = {ClassLabel.NORMAL: 0, ClassLabel.MALWARE: 1}


def as_label_array(labels: Sequence) -> np.ndarray:
    """Coerce ClassLabel sequences (or 0/1 codes) to a uint8 code array."""
    if isinstance(labels, np.ndarray) and labels.dtype != object:
        return labels.astype(np.uint8)
    return np.fromiter((_LABEL_CODE[l] if isinstance(l, ClassLabel) else int(l)
                        for l in labels), dtype=np.uint8, count=len(labels))


def format_cell(value: float) -> str:
    """Shortest 9-significant-digit decimal form; stable under re-parsing."""
    return format(float(value), ".9g")


@dataclass(frozen=True)
class FeatureMatrix:
    """Immutable labeled feature table. Rows keep ingestion order."""

    feature_ids: tuple[str, ...]
    values: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) uint8; 0 = normal, 1 = malware
    flow_ids: tuple[str, ...]

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_ids):
            raise DatasetError("value array shape does not match feature ids")
        if len(self.labels) != len(self.values) or len(self.flow_ids) != len(self.values):
            raise DatasetError("row count mismatch between values, labels and flow ids")
        self.values.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def class_counts(self) -> dict[ClassLabel, int]:
        return {lab: int(np.count_nonzero(self.labels == code))
                for lab, code in _LABEL_CODE.items()}

    def feature_index(self, feature_id: str) -> int:
        try:
            return self.feature_ids.index(feature_id)
        except ValueError:
            raise DatasetError(f"unknown feature id {feature_id!r}") from None

    def column(self, feature_id: str) -> tuple[list[float], list[ClassLabel]]:
        """Values and labels of one feature, parallel, in row order."""
        col = self.values[:, self.feature_index(feature_id)]
        return list(map(float, col)), [LABELS[c] for c in self.labels]

    def col_array(self, feature_id: str) -> np.ndarray:
        return self.values[:, self.feature_index(feature_id)]

    def take(self, rows: np.ndarray) -> "FeatureMatrix":
        """Row-subset matrix (used by fold evaluation)."""
        return FeatureMatrix(
            feature_ids=self.feature_ids,
            values=self.values[rows].copy(),
            labels=self.labels[rows].copy(),
            flow_ids=tuple(self.flow_ids[i] for i in rows),
        )

    @classmethod
    def from_rows(cls, feature_ids: Sequence[str], rows: Sequence[Sequence[float]],
                  labels: Sequence, flow_ids: Sequence[str] | None = None) -> "FeatureMatrix":
        n = len(rows)
        values = np.asarray(rows, dtype=np.float64).reshape(n, len(feature_ids))
        if flow_ids is None:
            flow_ids = tuple(f"row-{i}" for i in range(n))
        return cls(tuple(feature_ids), values, as_label_array(labels), tuple(flow_ids))

    @classmethod
    def from_vectors(cls, vectors: Iterable) -> "FeatureMatrix":
        """Build from FeatureVector-like objects (.flow_id, .values dict, .label)."""
        vectors = list(vectors)
        rows = [[v.values[fid] for fid in FEATURE_IDS] for v in vectors]
        labels = [v.label for v in vectors]
        if any(l is None for l in labels):
            raise DatasetError("every feature vector needs a label before matrix assembly")
        return cls.from_rows(FEATURE_IDS, rows, labels,
                             [v.flow_id for v in vectors])


def concat(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    if a.feature_ids != b.feature_ids:
        raise DatasetError("cannot concatenate matrices with different feature ids")
    return FeatureMatrix(
        feature_ids=a.feature_ids,
        values=np.vstack([a.values, b.values]),
        labels=np.concatenate([a.labels, b.labels]),
        flow_ids=a.flow_ids + b.flow_ids,
    )


def _validate_header(header: list[str]) -> tuple[str, ...]:
    expected_full = ["flow_id", *FEATURE_IDS, "label"]
    if len(header) < 3 or header[0] != "flow_id" or header[-1] != "label":
        raise DatasetError(
            f"wrong CSV header: expected {','.join(expected_full)!r} "
            f"(or a feature subset), found {','.join(header)!r}")
    feats = header[1:-1]
    positions = []
    for f in feats:
        if f not in FEATURE_IDS:
            raise DatasetError(
                f"wrong CSV header: unknown feature column {f!r}; "
                f"expected columns from {','.join(FEATURE_IDS)}")
        positions.append(FEATURE_IDS.index(f))
    if positions != sorted(positions) or len(set(positions)) != len(positions):
        raise DatasetError(
            "wrong CSV header: feature columns must be unique and in "
            f"canonical order F1..F16, found {','.join(feats)!r}")
    return tuple(feats)


def load_csv(source) -> FeatureMatrix:
    """Read a feature CSV from a path or file object."""
    if hasattr(source, "read"):
        return _load_csv_file(source)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _load_csv_file(fh)


def _load_csv_file(fh) -> FeatureMatrix:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("wrong CSV header: file is empty") from None
    feats = _validate_header(header)
    rows, labels, flow_ids = [], [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(feats) + 2:
            raise DatasetError(f"row {lineno}: expected {len(feats) + 2} cells, found {len(rec)}")
        flow_ids.append(rec[0])
        vals = []
        for col, cell in zip(feats, rec[1:-1]):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetError(
                    f"row {lineno}, column {col}: cannot parse numeric cell {cell!r}") from None
        rows.append(vals)
        labels.append(ClassLabel.parse(rec[-1]))
    values = (np.asarray(rows, dtype=np.float64) if rows
              else np.empty((0, len(feats)), dtype=np.float64))
    return FeatureMatrix(feats, values, as_label_array(labels), tuple(flow_ids))


def save_csv(matrix: FeatureMatrix, dest) -> None:
    """Write the schema-exact CSV (LF endings, 9-significant-digit floats)."""
    if hasattr(dest, "write"):
        _save_csv_file(matrix, dest)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _save_csv_file(matrix, fh)


def _save_csv_file(matrix: FeatureMatrix, fh) -> None:
    fh.write(",".join(["flow_id", *matrix.feature_ids, "label"]) + "\n")
    for i in range(matrix.n_rows):
        cells = [matrix.flow_ids[i]]
        cells += [format_cell(v) for v in matrix.values[i]]
        cells.append(LABELS[matrix.labels[i]].value)
        fh.write(",".join(cells) + "\n")


def to_csv_string(matrix: FeatureMatrix) -> str:
    buf = io.StringIO()
    _save_csv_file(matrix, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class FoldPlan:
    """Stratified assignment of row indices to k folds."""

    k: int
    seed: int
    assignment: np.ndarray  # (n,) int, fold index per row

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def fold_sizes(self) -> list[int]:
        return [int(np.count_nonzero(self.assignment == f)) for f in range(self.k)]

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "seed": self.seed,
                           "assignment": [int(a) for a in self.assignment]})

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        obj = json.loads(text)
        return cls(int(obj["k"]), int(obj["seed"]),
                   np.asarray(obj["assignment"], dtype=np.int64))


def stratified_kfold(matrix: FeatureMatrix, k: int, seed: int) -> FoldPlan:
    """Deterministic stratified k-fold plan.

    Rows of each class are shuffled by a seed derived from (seed, class)
    and dealt round-robin, so per-class fold sizes differ by at most one.
    """
    if k < 2:
        raise DatasetError(f"fold count must be at least 2, got {k}")
    assignment = np.empty(matrix.n_rows, dtype=np.int64)
    for code, label in enumerate(LABELS):
        idx = np.flatnonzero(matrix.labels == code)
        if len(idx) < k:
            raise DatasetError(
                f"class '{label.value}' has {len(idx)} rows; need at least k={k}")
        rng = np.random.default_rng(derive_seed(seed, "stratified-fold", code))
        perm = rng.permutation(idx)
        assignment[perm] = np.arange(len(perm)) % k
    return FoldPlan(k=k, seed=seed, assignment=assignment)
