"""Evaluation measures for multi-label predictions.

Per-label F1 uses 2*TP / (2*TP + FP + FN) with 0/0 defined as 0.  Macro-F1
averages over the whole label vocabulary, including labels absent from the
test split.  The accuracy/Micro-F1 identity holds on single-label data, and
Micro-F1 is always bounded by

    2 * sum_i min(predicted_count_i, true_count_i)
    -----------------------------------------------
    sum_i (true_count_i + predicted_count_i)

which reaches 1 exactly when every predicted count matches the true count.
All arithmetic is plain Python so results are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

BOUND_SLACK = 1e-12


def _as_label_lists(pred) -> list:
    if hasattr(pred, "predicted"):
        return pred.predicted
    return list(pred)


def _pred_n_labels(pred, truth, n_labels: int | None) -> int:
    if n_labels is not None:
        return n_labels
    if hasattr(pred, "n_labels"):
        return pred.n_labels
    mx = -1
    for sets in (truth, _as_label_lists(pred)):
        for s in sets:
            for lbl in s:
                mx = max(mx, lbl)
    return mx + 1


@dataclass
class ConfusionCounts:
    """Per-label true-positive/false-positive/false-negative counts."""

    tp: list[int]
    fp: list[int]
    fn: list[int]

    @property
    def n_labels(self) -> int:
        return len(self.tp)

    @property
    def tp_sum(self) -> int:
        return sum(self.tp)

    @property
    def fp_sum(self) -> int:
        return sum(self.fp)

    @property
    def fn_sum(self) -> int:
        return sum(self.fn)


def confusion(truth, pred, n_labels: int | None = None) -> ConfusionCounts:
    """Exact per-label confusion counts from truth sets and predicted sets."""
    pred_lists = _as_label_lists(pred)
    if len(truth) != len(pred_lists):
        raise ValueError(
            f"{len(truth)} truth rows vs {len(pred_lists)} prediction rows")
    nl = _pred_n_labels(pred, truth, n_labels)
    tp, fp, fn = [0] * nl, [0] * nl, [0] * nl
    for t_row, p_row in zip(truth, pred_lists):
        t_set, p_set = set(t_row), set(p_row)
        for j in t_set & p_set:
            tp[j] += 1
        for j in p_set - t_set:
            fp[j] += 1
        for j in t_set - p_set:
            fn[j] += 1
    return ConfusionCounts(tp, fp, fn)


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(counts: ConfusionCounts) -> float:
    if counts.n_labels < 1:
        raise ValueError("need at least one label")
    return sum(_f1(counts.tp[j], counts.fp[j], counts.fn[j])
               for j in range(counts.n_labels)) / counts.n_labels


def micro_f1(counts: ConfusionCounts) -> float:
    return _f1(counts.tp_sum, counts.fp_sum, counts.fn_sum)


def instance_f1(truth, pred) -> float:
    pred_lists = _as_label_lists(pred)
    if len(truth) != len(pred_lists):
        raise ValueError("misaligned truth/prediction lengths")
    if not truth:
        raise ValueError("empty test set")
    terms = []
    for t_row, p_row in zip(truth, pred_lists):
        t_set, p_set = set(t_row), set(p_row)
        denom = len(t_set) + len(p_set)
        terms.append(2 * len(t_set & p_set) / denom if denom else 0.0)
    # fsum: the mean is bit-identical under instance reordering
    return math.fsum(terms) / len(truth)


def micro_upper_bound(true_counts, predicted_counts) -> float:
    """Micro-F1 ceiling implied by the per-instance label-set sizes alone."""
    true_counts = list(true_counts)
    predicted_counts = list(predicted_counts)
    if len(true_counts) != len(predicted_counts):
        raise ValueError("misaligned count lists")
    if any(k < 0 for k in true_counts + predicted_counts):
        raise ValueError("counts must be nonnegative")
    denom = sum(true_counts) + sum(predicted_counts)
    if denom == 0:
        return 0.0
    return 2 * sum(min(kh, k) for kh, k in zip(predicted_counts, true_counts)) / denom


def multiclass_accuracy(truth, pred) -> float:
    """Fraction of exact matches; requires singleton truths and predictions."""
    pred_lists = _as_label_lists(pred)
    if len(truth) != len(pred_lists):
        raise ValueError("misaligned truth/prediction lengths")
    correct = 0
    for t_row, p_row in zip(truth, pred_lists):
        if len(t_row) != 1 or len(p_row) != 1:
            raise ValueError("accuracy requires single-label truths and predictions")
        correct += int(next(iter(t_row)) == next(iter(p_row)))
    return correct / len(truth)


def precision_at_k(truth, decisions: np.ndarray, k: int) -> float:
    """Mean over instances of |top-k by decision value intersect truth| / k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > decisions.shape[1]:
        raise ValueError(f"k={k} exceeds {decisions.shape[1]} labels")
    if len(truth) != decisions.shape[0]:
        raise ValueError("misaligned truth/decision lengths")
    terms = []
    for t_row, row in zip(truth, decisions):
        top = np.argsort(-row, kind="stable")[:k]
        terms.append(len(set(int(i) for i in top) & set(t_row)) / k)
    return math.fsum(terms) / len(truth)


@dataclass
class MetricsReport:
    """All applicable measures for one (truth, prediction) pairing."""

    macro_f1: float
    micro_f1: float
    instance_f1: float
    micro_upper_bound: float
    n_test: int
    accuracy_multiclass: float | None = None
    precision_at_k: float | None = None
    k: int | None = None
    strategy: str | None = None

    def bound_satisfied(self) -> bool:
        return self.micro_f1 <= self.micro_upper_bound + BOUND_SLACK

    def to_dict(self) -> dict:
        out = {
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "instance_f1": self.instance_f1,
            "micro_upper_bound": self.micro_upper_bound,
            "micro_bound_satisfied": self.bound_satisfied(),
            "n_test": self.n_test,
            "accuracy_multiclass": self.accuracy_multiclass,
            "precision_at_k": self.precision_at_k,
            "k": self.k,
            "strategy": self.strategy,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def evaluate(truth, pred, n_labels: int | None = None,
             decisions: np.ndarray | None = None, k: int | None = None,
             strategy: str | None = None) -> MetricsReport:
    """Build a full report; accuracy only when all sets are singletons."""
    pred_lists = _as_label_lists(pred)
    counts = confusion(truth, pred, n_labels=n_labels)
    true_sizes = [len(set(t)) for t in truth]
    pred_sizes = [len(set(p)) for p in pred_lists]
    accuracy = None
    if all(s == 1 for s in true_sizes) and all(s == 1 for s in pred_sizes):
        accuracy = multiclass_accuracy(truth, pred_lists)
    p_at_k = None
    if k is not None:
        if decisions is None and hasattr(pred, "decisions"):
            decisions = pred.decisions
        if decisions is None:
            raise ValueError("precision@k needs decision values")
        p_at_k = precision_at_k(truth, decisions, k)
    if strategy is None and hasattr(pred, "strategy"):
        strategy = pred.strategy
    return MetricsReport(
        macro_f1=macro_f1(counts),
        micro_f1=micro_f1(counts),
        instance_f1=instance_f1(truth, pred_lists),
        micro_upper_bound=micro_upper_bound(true_sizes, pred_sizes),
        n_test=len(truth),
        accuracy_multiclass=accuracy,
        precision_at_k=p_at_k,
        k=k,
        strategy=strategy,
    )
