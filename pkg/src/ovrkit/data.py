"""Sparse multi-label datasets: file parsing, splitting, and CV fold plans.

Two input formats are supported:

* ``svmlight`` (multi-label variant): one instance per line,
  ``lbl[,lbl...] idx:val [idx:val ...]``.  The label field may be empty
  (line starts with whitespace, or the first token is already a feature).
  Lines starting with ``#`` are comments; blank lines are skipped.
* ``pair``: a dense feature file (whitespace-separated values, one row per
  line) plus a row-aligned label file (one comma-separated label list per
  line; an empty line means "no labels").

Label and feature indices are 0-based internally; pass ``one_based=True``
for files that count from 1.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._rng import SplitMix64

logger = logging.getLogger(__name__)


class DataFormatError(ValueError):
    """Raised for malformed dataset/plan files; carries the offending line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif path is not None:
            where += " "
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass
class SparseDataset:
    """Immutable row-sparse feature matrix paired with per-instance label sets.

    ``rows[i]`` is a list of ``(feature_index, value)`` pairs sorted by index;
    ``label_sets[i]`` is a sorted tuple of label indices.  Instances with
    empty label sets are retained: they act as all-negative examples for
    every binary problem.
    """

    n_instances: int
    n_features: int
    n_labels: int
    rows: list[list[tuple[int, float]]]
    label_sets: list[tuple[int, ...]]
    _csr: sparse.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_instances != len(self.rows) or self.n_instances != len(self.label_sets):
            raise ValueError("row/label list lengths disagree with n_instances")
        for i, row in enumerate(self.rows):
            prev = -1
            for idx, val in row:
                if idx <= prev:
                    raise ValueError(f"instance {i}: feature indices not strictly increasing")
                if idx >= self.n_features:
                    raise ValueError(f"instance {i}: feature index {idx} >= n_features")
                if not np.isfinite(val):
                    raise ValueError(f"instance {i}: non-finite feature value {val!r}")
                prev = idx
        for i, labels in enumerate(self.label_sets):
            prev = -1
            for lbl in labels:
                if lbl <= prev:
                    raise ValueError(f"instance {i}: labels not strictly increasing")
                if lbl >= self.n_labels:
                    raise ValueError(f"instance {i}: label {lbl} >= n_labels")
                prev = lbl

    @property
    def empty_label_count(self) -> int:
        return sum(1 for s in self.label_sets if not s)

    def feature_matrix(self) -> sparse.csr_matrix:
        """CSR view of the features, built once and cached."""
        if self._csr is None:
            data, indices, indptr = [], [], [0]
            for row in self.rows:
                for idx, val in row:
                    indices.append(idx)
                    data.append(val)
                indptr.append(len(indices))
            self._csr = sparse.csr_matrix(
                (np.asarray(data, dtype=np.float64),
                 np.asarray(indices, dtype=np.int32),
                 np.asarray(indptr, dtype=np.int64)),
                shape=(self.n_instances, self.n_features),
            )
        return self._csr

    def label_counts(self) -> list[int]:
        """Number of true labels per instance."""
        return [len(s) for s in self.label_sets]

    def positives_of_label(self, label: int) -> int:
        return sum(1 for s in self.label_sets if label in s)

    def y_for_label(self, label: int) -> np.ndarray:
        """Per-instance sign vector: +1 where the instance has the label."""
        y = np.full(self.n_instances, -1.0)
        for i, s in enumerate(self.label_sets):
            if label in s:
                y[i] = 1.0
        return y

    def subset(self, indices) -> "SparseDataset":
        """Dataset restricted to the given instances; vocab sizes unchanged."""
        rows = [self.rows[i] for i in indices]
        labels = [self.label_sets[i] for i in indices]
        return SparseDataset(len(rows), self.n_features, self.n_labels, rows, labels)

    def l2_normalized(self) -> "SparseDataset":
        """Per-instance L2 normalization (off by default in all pipelines)."""
        rows = []
        for row in self.rows:
            norm = np.sqrt(sum(v * v for _, v in row))
            if norm > 0:
                rows.append([(i, v / norm) for i, v in row])
            else:
                rows.append(list(row))
        return SparseDataset(self.n_instances, self.n_features, self.n_labels,
                             rows, list(self.label_sets))


def _parse_labels_token(token: str, one_based: bool, path: str, lineno: int) -> tuple[int, ...]:
    if token == "":
        return ()
    labels = set()
    for part in token.split(","):
        if part == "":
            raise DataFormatError("empty label entry", path, lineno)
        try:
            lbl = int(part)
        except ValueError:
            raise DataFormatError(f"bad label {part!r}", path, lineno) from None
        if one_based:
            lbl -= 1
        if lbl < 0:
            raise DataFormatError(f"negative label index {part!r}", path, lineno)
        labels.add(lbl)
    return tuple(sorted(labels))


def _parse_feature_token(token: str, one_based: bool, path: str, lineno: int) -> tuple[int, float]:
    idx_s, sep, val_s = token.partition(":")
    if not sep:
        raise DataFormatError(f"expected idx:val, got {token!r}", path, lineno)
    try:
        idx = int(idx_s)
        val = float(val_s)
    except ValueError:
        raise DataFormatError(f"bad feature {token!r}", path, lineno) from None
    if one_based:
        idx -= 1
    if idx < 0:
        raise DataFormatError(f"negative feature index {token!r}", path, lineno)
    if not np.isfinite(val):
        raise DataFormatError(f"non-finite feature value {token!r}", path, lineno)
    return idx, val


def parse_svmlight(path, one_based: bool = False,
                   n_features: int | None = None,
                   n_labels: int | None = None) -> SparseDataset:
    """Parse a multi-label svmlight file."""
    path = str(path)
    rows: list[list[tuple[int, float]]] = []
    label_sets: list[tuple[int, ...]] = []
    max_feat = -1
    max_lbl = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            has_label_field = not raw[0].isspace()
            tokens = raw.split()
            if has_label_field and ":" in tokens[0]:
                has_label_field = False  # first token is already a feature
            if has_label_field:
                labels = _parse_labels_token(tokens[0], one_based, path, lineno)
                feat_tokens = tokens[1:]
            else:
                labels = ()
                feat_tokens = tokens
            feats = [_parse_feature_token(t, one_based, path, lineno) for t in feat_tokens]
            feats.sort()
            for (a, _), (b, _) in zip(feats, feats[1:]):
                if a == b:
                    raise DataFormatError(f"duplicate feature index {a}", path, lineno)
            rows.append(feats)
            label_sets.append(labels)
            if feats:
                max_feat = max(max_feat, feats[-1][0])
            if labels:
                max_lbl = max(max_lbl, labels[-1])
    if not rows:
        raise DataFormatError("no instances found", path)
    nf = n_features if n_features is not None else max_feat + 1
    nl = n_labels if n_labels is not None else max_lbl + 1
    ds = SparseDataset(len(rows), nf, nl, rows, label_sets)
    if ds.empty_label_count:
        logger.warning("%s: %d instance(s) with empty label sets", path, ds.empty_label_count)
    return ds


def parse_label_file(path, one_based: bool = False) -> list[tuple[int, ...]]:
    """One comma-separated label list per line; empty line = no labels."""
    path = str(path)
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            token = raw.strip()
            out.append(_parse_labels_token(token, one_based, path, lineno))
    if not out:
        raise DataFormatError("no label rows found", path)
    return out


def parse_feature_label_pair(feature_path, label_path,
                             one_based: bool = False,
                             n_labels: int | None = None) -> SparseDataset:
    """Parse a dense feature file plus a row-aligned label file."""
    feature_path = str(feature_path)
    rows: list[list[tuple[int, float]]] = []
    width = None
    with open(feature_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens:
                raise DataFormatError("blank feature row", feature_path, lineno)
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise DataFormatError("bad feature value", feature_path, lineno) from None
            if any(not np.isfinite(v) for v in values):
                raise DataFormatError("non-finite feature value", feature_path, lineno)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataFormatError(
                    f"expected {width} values, got {len(values)}", feature_path, lineno)
            rows.append([(j, v) for j, v in enumerate(values) if v != 0.0])
    if not rows:
        raise DataFormatError("no feature rows found", feature_path)
    label_sets = parse_label_file(label_path, one_based=one_based)
    if len(label_sets) != len(rows):
        raise DataFormatError(
            f"label file has {len(label_sets)} rows, feature file has {len(rows)}",
            str(label_path))
    max_lbl = max((s[-1] for s in label_sets if s), default=-1)
    nl = n_labels if n_labels is not None else max_lbl + 1
    ds = SparseDataset(len(rows), width, nl, rows, label_sets)
    if ds.empty_label_count:
        logger.warning("%s: %d instance(s) with empty label sets",
                       feature_path, ds.empty_label_count)
    return ds


def parse_dataset(path, format: str = "svmlight", label_path=None,
                  one_based: bool = False,
                  n_features: int | None = None,
                  n_labels: int | None = None) -> SparseDataset:
    """Parse a dataset in the named format (``svmlight`` or ``pair``)."""
    if format == "svmlight":
        return parse_svmlight(path, one_based=one_based,
                              n_features=n_features, n_labels=n_labels)
    if format == "pair":
        if label_path is None:
            raise ValueError("pair format requires label_path")
        return parse_feature_label_pair(path, label_path,
                                        one_based=one_based, n_labels=n_labels)
    raise ValueError(f"unknown dataset format {format!r}")


def save_svmlight(dataset: SparseDataset, path) -> None:
    """Write in the svmlight multi-label format; round-trips exactly."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for row, labels in zip(dataset.rows, dataset.label_sets):
            lbl = ",".join(str(x) for x in labels)
            feats = " ".join(f"{i}:{float(v)!r}" for i, v in row)
            fh.write(f"{lbl} {feats}".rstrip() + "\n")


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic train/test partition of instance indices."""

    seed: int
    train_fraction: float
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]

    @property
    def n_instances(self) -> int:
        return len(self.train_indices) + len(self.test_indices)

    def digest(self) -> str:
        return hashlib.sha256(serialize_split(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic balanced k-fold assignment over training instances."""

    seed: int
    k: int
    assignment: tuple[int, ...]

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f == fold]

    def complement_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f != fold]

    def digest(self) -> str:
        return hashlib.sha256(serialize_folds(self).encode()).hexdigest()[:16]


def make_split(n_instances: int, seed: int, train_fraction: float) -> SplitPlan:
    """Shuffle indices with SplitMix64 and cut at round(fraction * n)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    if n_instances < 2:
        raise ValueError("need at least 2 instances to split")
    order = list(range(n_instances))
    SplitMix64(seed).shuffle(order)
    n_train = round(train_fraction * n_instances)
    if n_train == 0 or n_train == n_instances:
        raise ValueError(
            f"degenerate split: round({train_fraction} * {n_instances}) leaves one side empty")
    return SplitPlan(seed, train_fraction,
                     tuple(sorted(order[:n_train])),
                     tuple(sorted(order[n_train:])))


def make_folds(train_size: int, k: int, seed: int) -> FoldPlan:
    """Balanced fold assignment (sizes differ by at most 1), deterministic."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > train_size:
        raise ValueError(f"k={k} exceeds train_size={train_size}")
    order = list(range(train_size))
    SplitMix64(seed).shuffle(order)
    assignment = [0] * train_size
    for pos, idx in enumerate(order):
        assignment[idx] = pos % k
    return FoldPlan(seed, k, tuple(assignment))


def serialize_split(plan: SplitPlan) -> str:
    return (
        f"split seed={plan.seed} train_fraction={plan.train_fraction!r}\n"
        f"train {' '.join(str(i) for i in plan.train_indices)}\n"
        f"test {' '.join(str(i) for i in plan.test_indices)}\n"
    )


def save_split(plan: SplitPlan, path) -> None:
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(serialize_split(plan))


def load_split(path) -> SplitPlan:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    try:
        head = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
        train = tuple(int(x) for x in lines[1].split()[1:])
        test = tuple(int(x) for x in lines[2].split()[1:])
        return SplitPlan(int(head["seed"]), float(head["train_fraction"]), train, test)
    except (IndexError, KeyError, ValueError):
        raise DataFormatError("malformed split plan", path) from None


def serialize_folds(plan: FoldPlan) -> str:
    return (
        f"folds seed={plan.seed} k={plan.k}\n"
        f"assignment {' '.join(str(f) for f in plan.assignment)}\n"
    )


def save_folds(plan: FoldPlan, path) -> None:
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(serialize_folds(plan))


def load_folds(path) -> FoldPlan:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    try:
        head = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
        assignment = tuple(int(x) for x in lines[1].split()[1:])
        return FoldPlan(int(head["seed"]), int(head["k"]), assignment)
    except (IndexError, KeyError, ValueError):
        raise DataFormatError("malformed fold plan", path) from None
