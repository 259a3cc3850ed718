"""Turn decision values into per-instance label subsets.

All strategies are pure functions of the decision matrix; ties break toward
the smallest label index.  The ``unrealistic`` strategy consumes ground-truth
label counts and exists only for auditing over-estimated benchmark scores:
it always emits a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .trainer import OvRModel


class GroundTruthUsageWarning(UserWarning):
    """Prediction consumed ground-truth information from the test set."""


@dataclass
class PredictionSet:
    """Decision matrix plus the predicted label subsets it induced."""

    decisions: np.ndarray
    predicted: list[list[int]]
    strategy: str

    @property
    def n_labels(self) -> int:
        return self.decisions.shape[1]

    def predicted_counts(self) -> list[int]:
        return [len(p) for p in self.predicted]


def decision_matrix(model: OvRModel, test) -> np.ndarray:
    """Entry (i, j) = w_j . x_i + bias_j + delta_j; always-negative rows -inf."""
    if test.n_features > model.n_features:
        raise ValueError(
            f"test data has {test.n_features} features, model has {model.n_features}")
    X = test.feature_matrix()
    if test.n_features < model.n_features:
        from scipy import sparse
        X = sparse.csr_matrix((X.data, X.indices, X.indptr),
                              shape=(X.shape[0], model.n_features))
    out = np.empty((test.n_instances, model.n_labels))
    for j, bm in enumerate(model.models):
        out[:, j] = bm.decision_values(X)
    return out


def _row_sets(mask: np.ndarray) -> list[list[int]]:
    return [[int(j) for j in np.flatnonzero(row)] for row in mask]


def predict_basic(decisions: np.ndarray, strategy: str = "basic") -> PredictionSet:
    """Sign rule: label predicted iff its decision value >= 0."""
    return PredictionSet(decisions, _row_sets(decisions >= 0.0), strategy)


def predict_no_empty(decisions: np.ndarray,
                     strategy: str = "no-empty") -> PredictionSet:
    """Sign rule, but empty rows get the argmax label instead."""
    if decisions.shape[1] < 1:
        raise ValueError("need at least one label")
    predicted = []
    for row in decisions:
        labels = [int(j) for j in np.flatnonzero(row >= 0.0)]
        if not labels:
            labels = [int(np.argmax(row))]
        predicted.append(labels)
    return PredictionSet(decisions, predicted, strategy)


def _top_k_indices(row: np.ndarray, k: int) -> list[int]:
    order = np.argsort(-row, kind="stable")  # stable: ties by ascending index
    return sorted(int(i) for i in order[:k])


def predict_unrealistic(decisions: np.ndarray, true_label_counts) -> PredictionSet:
    """Top-K_i labels where K_i is the instance's true label count.

    Uses ground truth at prediction time; kept for auditing only.
    """
    counts = list(true_label_counts)
    if len(counts) != decisions.shape[0]:
        raise ValueError("label count list does not match instance count")
    n_labels = decisions.shape[1]
    if any(k > n_labels or k < 0 for k in counts):
        raise ValueError("a label count exceeds the label vocabulary")
    warnings.warn(
        "unrealistic prediction consumed ground-truth label counts from the test set",
        GroundTruthUsageWarning, stacklevel=2)
    predicted = [_top_k_indices(row, k) for row, k in zip(decisions, counts)]
    return PredictionSet(decisions, predicted, "unrealistic")


def predict_top_k(decisions: np.ndarray, k: int) -> PredictionSet:
    """Fixed top-k labels per instance."""
    if k > decisions.shape[1]:
        raise ValueError(f"k={k} exceeds {decisions.shape[1]} labels")
    predicted = [_top_k_indices(row, k) for row in decisions]
    return PredictionSet(decisions, predicted, "top-k")


def dump_predictions(pred: PredictionSet, path) -> None:
    """One comma-separated label line per instance (empty line = empty set)."""
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(f"# strategy: {pred.strategy}\n")
        if pred.strategy == "unrealistic":
            fh.write("# audit: ground-truth label counts were consumed\n")
        for labels in pred.predicted:
            fh.write(",".join(str(x) for x in labels) + "\n")


def load_predictions(path) -> list[tuple[int, ...]]:
    out = []
    with open(str(path), "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                continue
            if not line.strip():
                out.append(())
                continue
            out.append(tuple(sorted(int(x) for x in line.split(","))))
    return out


def read_dump_strategy(path) -> str | None:
    """Strategy tag recorded in a prediction dump header, if any."""
    with open(str(path), "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("# strategy: "):
        return first[len("# strategy: "):].strip()
    return None


def dump_decisions(decisions: np.ndarray, path) -> None:
    """Tab-separated decision values, one row per instance."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for row in decisions:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")


def load_decisions(path) -> np.ndarray:
    rows = []
    with open(str(path), "r", encoding="utf-8") as fh:
        for raw in fh:
            if raw.startswith("#") or not raw.strip():
                continue
            rows.append([float(t) for t in raw.split("\t")])
    return np.asarray(rows)
