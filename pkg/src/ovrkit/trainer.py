"""One-vs-rest orchestration and model (de)serialization.

``train_ovr_basic`` trains every label at a fixed ``C``; ``train_ovr_basic_C``
selects ``C`` per label by cross-validated F1 over a warm-started parameter
path, falling back to ``C=1`` when every grid value scores zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .data import FoldPlan, SparseDataset, make_folds
from .solver import (DEFAULT_TOLERANCE, BinaryModel, BinaryProblem,
                     train_binary)

logger = logging.getLogger(__name__)

FALLBACK_C = 1.0


@dataclass(frozen=True)
class CGrid:
    """Strictly increasing positive regularization values."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty C grid")
        if any(c <= 0 for c in self.values):
            raise ValueError("C values must be positive")
        if any(a >= b for a, b in zip(self.values, self.values[1:])):
            raise ValueError("C values must be strictly increasing")

    def describe(self) -> str:
        return "C=" + ",".join(repr(c) for c in self.values)


def default_c_grid() -> CGrid:
    """21 geometric values 2^-10 .. 2^10."""
    return CGrid(tuple(float(2.0 ** k) for k in range(-10, 11)))


@dataclass
class Provenance:
    seed: int | None = None
    fold_digest: str | None = None
    grid: str | None = None


@dataclass
class OvRModel:
    """Ordered per-label binary models plus training metadata."""

    models: list[BinaryModel]
    strategy_tag: str
    provenance: Provenance = field(default_factory=Provenance)
    n_features: int = 0
    calibration: list | None = None

    @property
    def n_labels(self) -> int:
        return len(self.models)


def _run_chunk(chunk):
    return [f(*args) for f, args in chunk]


def _parallel(n_jobs: int, tasks):
    """Run (fn, args) tasks, preserving task order in the result list.

    Workers are separate processes, so tasks are grouped into one chunk per
    worker; the closure state (feature matrices, fold views) is then
    serialized once per worker instead of once per label.  Worth it only for
    long-running jobs; the default n_jobs=1 stays in-process.
    """
    tasks = list(tasks)
    if n_jobs == 1 or len(tasks) <= 1:
        return _run_chunk(tasks)
    n_chunks = min(n_jobs if n_jobs > 0 else len(tasks), len(tasks))
    chunks = [tasks[i::n_chunks] for i in range(n_chunks)]
    outs = Parallel(n_jobs=n_chunks)(delayed(_run_chunk)(c) for c in chunks)
    results = [None] * len(tasks)
    for lane, out in enumerate(outs):
        for pos, value in enumerate(out):
            results[lane + pos * n_chunks] = value
    return results


def train_ovr_basic(train: SparseDataset, C: float = 1.0,
                    tolerance: float = DEFAULT_TOLERANCE,
                    n_jobs: int = 1) -> OvRModel:
    """One binary model per label at fixed C (t=1, delta=0)."""
    if train.n_instances == 0:
        raise ValueError("empty training set")
    X = train.feature_matrix()
    ys = [train.y_for_label(j) for j in range(train.n_labels)]

    def one(label):
        return train_binary(BinaryProblem(X, ys[label], label_index=label),
                            C=C, tolerance=tolerance)

    models = _parallel(n_jobs, [(one, (j,)) for j in range(train.n_labels)])
    return OvRModel(models, "basic", Provenance(grid=f"C={C!r}"),
                    n_features=train.n_features)


@dataclass
class _FoldView:
    """Pre-sliced fold matrices shared across per-label CV tasks."""

    train_X: object
    val_X: object
    train_idx: np.ndarray
    val_idx: np.ndarray


def _fold_views(train: SparseDataset, folds: FoldPlan) -> list[_FoldView]:
    X = train.feature_matrix()
    views = []
    for f in range(folds.k):
        tr = np.asarray(folds.complement_indices(f), dtype=np.intp)
        va = np.asarray(folds.fold_indices(f), dtype=np.intp)
        views.append(_FoldView(X[tr], X[va], tr, va))
    return views


def _pooled_f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def _cv_f1_for_label(y: np.ndarray, label: int, grid: CGrid,
                     views: list[_FoldView], tolerance: float) -> list[tuple[float, float]]:
    if not np.any(y > 0):
        return [(C, 0.0) for C in grid.values]
    counts = {C: [0, 0, 0] for C in grid.values}  # tp, fp, fn pooled over folds
    for view in views:
        y_tr, y_va = y[view.train_idx], y[view.val_idx]
        problem = BinaryProblem(view.train_X, y_tr, label_index=label)
        warm = None
        for C in grid.values:
            model = train_binary(problem, C=C, tolerance=tolerance, warm_start=warm)
            warm = model
            pred_pos = model.decision_values(view.val_X) >= 0.0
            actual_pos = y_va > 0
            tp = int(np.sum(pred_pos & actual_pos))
            counts[C][0] += tp
            counts[C][1] += int(np.sum(pred_pos)) - tp
            counts[C][2] += int(np.sum(actual_pos)) - tp
    return [(C, _pooled_f1(*counts[C])) for C in grid.values]


def cv_f1_for_C(train: SparseDataset, label: int, grid: CGrid,
                folds: FoldPlan,
                tolerance: float = DEFAULT_TOLERANCE) -> list[tuple[float, float]]:
    """Pooled out-of-fold F1 (sign rule) for each C, warm-started ascending."""
    if len(folds.assignment) != train.n_instances:
        raise ValueError("fold plan does not cover the training set")
    return _cv_f1_for_label(train.y_for_label(label), label, grid,
                            _fold_views(train, folds), tolerance)


def select_C(scores: list[tuple[float, float]]) -> tuple[float, float, bool]:
    """Argmax CV-F1; ties take the smallest C; all zeros fall back to C=1.

    Returns (C, cv_f1, fallback_used).
    """
    best_C, best_f1 = scores[0]
    for C, f1 in scores[1:]:
        if f1 > best_f1:
            best_C, best_f1 = C, f1
    if best_f1 == 0.0:
        return FALLBACK_C, 0.0, True
    return best_C, best_f1, False


def train_ovr_basic_C(train: SparseDataset, grid: CGrid | None = None,
                      folds: FoldPlan | None = None, seed: int = 0, k: int = 5,
                      tolerance: float = DEFAULT_TOLERANCE,
                      n_jobs: int = 1) -> OvRModel:
    """Per-label C selection by CV F1, then full-train refit at the chosen C."""
    if train.n_instances == 0:
        raise ValueError("empty training set")
    grid = grid or default_c_grid()
    if folds is None:
        folds = make_folds(train.n_instances, k, seed)
    views = _fold_views(train, folds)
    X = train.feature_matrix()
    ys = [train.y_for_label(j) for j in range(train.n_labels)]

    def one(label):
        scores = _cv_f1_for_label(ys[label], label, grid, views, tolerance)
        C, cv_f1, fallback = select_C(scores)
        model = train_binary(BinaryProblem(X, ys[label], label_index=label),
                             C=C, tolerance=tolerance)
        return model, (label, C, cv_f1, fallback)

    results = _parallel(n_jobs, [(one, (j,)) for j in range(train.n_labels)])
    models = [m for m, _ in results]
    chosen = [c for _, c in results]
    n_fallback = sum(1 for *_, fb in chosen if fb)
    if n_fallback:
        logger.info("C selection fell back to C=%g for %d/%d labels",
                    FALLBACK_C, n_fallback, train.n_labels)
    return OvRModel(models, "basic-C",
                    Provenance(seed=folds.seed, fold_digest=folds.digest(),
                               grid=grid.describe()),
                    n_features=train.n_features, calibration=chosen)


# --- model file format (version 1) -----------------------------------------
#
#   ovrkit-model 1
#   n_features <int>
#   n_labels <int>
#   strategy <tag>
#   seed <int or ->
#   fold_digest <hex or ->
#   grid <free text or ->
#   label <j> C=<float> t=<float> delta=<float> always_negative=<0|1> bias=<float>
#   weights [idx:val ...]
#   ... (two lines per label)
#
# Floats are written with repr() so the round-trip is exact.

_FORMAT_VERSION = 1


def save_model(model: OvRModel, path) -> None:
    with open(str(path), "w", encoding="utf-8") as fh:
        p = model.provenance
        fh.write(f"ovrkit-model {_FORMAT_VERSION}\n")
        fh.write(f"n_features {model.n_features}\n")
        fh.write(f"n_labels {model.n_labels}\n")
        fh.write(f"strategy {model.strategy_tag}\n")
        fh.write(f"seed {p.seed if p.seed is not None else '-'}\n")
        fh.write(f"fold_digest {p.fold_digest or '-'}\n")
        fh.write(f"grid {p.grid or '-'}\n")
        for j, bm in enumerate(model.models):
            fh.write(f"label {j} C={float(bm.C)!r} t={float(bm.t)!r} "
                     f"delta={float(bm.delta)!r} "
                     f"always_negative={int(bm.always_negative)} "
                     f"bias={float(bm.bias)!r}\n")
            nz = " ".join(f"{i}:{float(v)!r}" for i, v in enumerate(bm.w) if v != 0.0)
            fh.write(f"weights {nz}".rstrip() + "\n")


def load_model(path) -> OvRModel:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("ovrkit-model "):
        raise ValueError(f"{path}: not an ovrkit model file")
    version = int(lines[0].split()[1])
    if version != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {version}")
    header = {}
    for line in lines[1:7]:
        key, _, rest = line.partition(" ")
        header[key] = rest
    n_features = int(header["n_features"])
    n_labels = int(header["n_labels"])
    seed = None if header["seed"] == "-" else int(header["seed"])
    fold_digest = None if header["fold_digest"] == "-" else header["fold_digest"]
    grid = None if header["grid"] == "-" else header["grid"]
    models = []
    pos = 7
    for j in range(n_labels):
        meta = lines[pos].split()
        if meta[0] != "label" or int(meta[1]) != j:
            raise ValueError(f"{path}: expected record for label {j}")
        kv = dict(item.split("=", 1) for item in meta[2:])
        w = np.zeros(n_features)
        weights_line = lines[pos + 1]
        if not weights_line.startswith("weights"):
            raise ValueError(f"{path}: missing weights line for label {j}")
        for token in weights_line.split()[1:]:
            idx, _, val = token.partition(":")
            w[int(idx)] = float(val)
        models.append(BinaryModel(
            w, bias=float(kv["bias"]), delta=float(kv["delta"]),
            C=float(kv["C"]), t=float(kv["t"]),
            always_negative=bool(int(kv["always_negative"]))))
        pos += 2
    return OvRModel(models, header["strategy"],
                    Provenance(seed=seed, fold_digest=fold_digest, grid=grid),
                    n_features=n_features)
