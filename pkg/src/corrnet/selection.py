"""Concordance-driven feature elimination.

Starting from all features, repeatedly take the highest-concordance pair
with both members still active, eliminate the member the feature-class
ranking considers worse, re-evaluate accuracy on the survivors, and
prune every pair containing the victim. Eliminations commit regardless
of accuracy movement; the best subset is tracked as the argmax over the
trace (earliest entry wins ties), with the all-features baseline
recorded as step 0.

The accuracy oracle is injectable: stratified cross-validation on the
training matrix (default), a held-out test matrix, or a replayed
sequence of recorded accuracies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

from .classifiers import ClassifierSpec, cross_validate, model_accuracy, train
from .dataset import FeatureMatrix
from .errors import SelectionAbort, SelectionError
from .ranking import ASCENDING_METHODS, PairQueue, RankedList, fc_ranking, ff_ranking
from .seeding import derive_seed

POLICIES = ("exhaustive", "stop-on-decline")

Evaluator = Callable[[tuple[str, ...]], float]


@dataclass(frozen=True)
class TraceEntry:
    step: int
    pair: tuple[str, str] | None   # None for the baseline row
    victim: str | None
    features: tuple[str, ...]      # surviving set after this step
    accuracy: float


@dataclass
class SelectionResult:
    best_subset: tuple[str, ...]
    best_accuracy: float
    trace: list[TraceEntry]


def _victim(pair: tuple[str, str], fc: RankedList) -> str:
    """The pair member the ranking considers worse.

    Worse means the smaller score under descending methods and the
    larger one under ascending methods; score ties fall back to the
    worse rank position (which already breaks ties by feature index).
    """
    a, b = pair
    sa, sb = fc.score_of(a), fc.score_of(b)
    if sa != sb:
        if fc.method in ASCENDING_METHODS:
            return a if sa > sb else b
        return a if sa < sb else b
    return a if fc.rank_of(a) > fc.rank_of(b) else b


def run_selection(fc: RankedList, ff: PairQueue, evaluate: Evaluator, *,
                  policy: str = "exhaustive", min_active: int = 1) -> SelectionResult:
    """Drive the elimination loop with an arbitrary accuracy oracle."""
    if policy not in POLICIES:
        raise SelectionError(f"unknown policy {policy!r}")
    if min_active < 1:
        raise SelectionError("min_active must be at least 1")
    unknown = ff.feature_ids() - set(fc.feature_ids)
    if unknown:
        raise SelectionError(
            f"pair queue references features missing from the ranking: "
            f"{', '.join(sorted(unknown))}")

    active = list(fc.feature_ids)
    queue = list(ff.pairs)
    trace: list[TraceEntry] = []
    best_subset = tuple(active)
    best_accuracy = 0.0

    def record(step, pair, victim, accuracy):
        nonlocal best_subset, best_accuracy
        entry = TraceEntry(step, pair, victim, tuple(active), accuracy)
        trace.append(entry)
        if accuracy > best_accuracy:
            best_accuracy = accuracy
            best_subset = entry.features

    def evaluated(features: tuple[str, ...]) -> float:
        try:
            return float(evaluate(features))
        except Exception as exc:
            raise SelectionAbort(f"accuracy evaluation failed: {exc}", trace) from exc

    record(0, None, None, evaluated(tuple(active)))

    step = 0
    while len(active) > min_active and queue:
        pair = queue[0].pair
        victim = _victim(pair, fc)
        active.remove(victim)
        step += 1
        accuracy = evaluated(tuple(active))
        previous = trace[-1].accuracy
        record(step, pair, victim, accuracy)
        queue = [p for p in queue if victim not in p.pair]
        if policy == "stop-on-decline" and accuracy < previous:
            break
    return SelectionResult(best_subset, best_accuracy, trace)


def cv_evaluator(matrix: FeatureMatrix, spec: ClassifierSpec,
                 k: int = 10, seed: int = 0) -> Evaluator:
    """k-fold mean accuracy on the training matrix."""
    def evaluate(features: tuple[str, ...]) -> float:
        return cross_validate(matrix, features, spec, k, seed).mean_accuracy
    return evaluate


def holdout_evaluator(train_matrix: FeatureMatrix, test_matrix: FeatureMatrix,
                      spec: ClassifierSpec, seed: int = 0) -> Evaluator:
    """Train on one matrix, score accuracy on a held-out one."""
    def evaluate(features: tuple[str, ...]) -> float:
        model = train(spec, train_matrix, features, derive_seed(seed, "holdout"))
        return model_accuracy(model, test_matrix)
    return evaluate


def replay_evaluator(accuracies: Sequence[float]) -> Evaluator:
    """Replays a recorded accuracy sequence, one value per evaluation."""
    values = iter(list(accuracies))

    def evaluate(_features: tuple[str, ...]) -> float:
        try:
            return next(values)
        except StopIteration:
            raise SelectionError("recorded accuracy sequence exhausted") from None
    return evaluate


def select_features(matrix: FeatureMatrix, fc: RankedList | None = None,
                    ff: PairQueue | None = None,
                    spec: ClassifierSpec | None = None, *,
                    policy: str = "exhaustive", min_active: int = 1,
                    k: int = 10, seed: int = 0,
                    accuracy_source: str = "cv",
                    test_matrix: FeatureMatrix | None = None) -> SelectionResult:
    """Rank (if needed), build the accuracy oracle, and run the loop."""
    spec = spec or ClassifierSpec()
    fc = fc if fc is not None else fc_ranking(matrix)
    ff = ff if ff is not None else ff_ranking(matrix)
    if set(fc.feature_ids) != set(matrix.feature_ids):
        raise SelectionError("ranking features do not match the matrix features")
    if accuracy_source == "cv":
        evaluate = cv_evaluator(matrix, spec, k, seed)
    elif accuracy_source == "holdout":
        if test_matrix is None:
            raise SelectionError("holdout accuracy source needs a test matrix")
        evaluate = holdout_evaluator(matrix, test_matrix, spec, seed)
    else:
        raise SelectionError(f"unknown accuracy source {accuracy_source!r}")
    return run_selection(fc, ff, evaluate, policy=policy, min_active=min_active)


def trace_rows(trace: Sequence[TraceEntry]) -> list[list[str]]:
    """CSV rows: step,pair,victim,features,accuracy."""
    from .dataset import format_cell

    rows = []
    for e in trace:
        rows.append([
            str(e.step),
            "-".join(e.pair) if e.pair else "",
            e.victim or "",
            ";".join(e.features),
            format_cell(e.accuracy),
        ])
    return rows


def result_to_json(result: SelectionResult, extra: dict | None = None) -> str:
    obj = {
        "best_subset": list(result.best_subset),
        "best_accuracy": result.best_accuracy,
        "trace": [
            {"step": e.step, "pair": list(e.pair) if e.pair else None,
             "victim": e.victim, "features": list(e.features),
             "accuracy": e.accuracy}
            for e in result.trace
        ],
    }
    if extra:
        obj.update(extra)
    return json.dumps(obj, indent=2)
