"""Threshold and cost-sensitive calibration on top of one-vs-rest training.

Thresholding learns a per-label additive shift ``delta`` applied to decision
values: per CV fold, candidate thresholds are the midpoints of adjacent
distinct validation decision values (plus one cut below the minimum and one
above the maximum) and the F1-best cut is kept.  The final shift is the mean
of the per-fold shifts.  The fbr heuristic guards against overfit thresholds
on rare labels: folds whose best validation F1 falls below the chosen fbr
floor contribute a shift placing the threshold at the fold's largest
validation decision value instead.  The fbr floor itself is selected by an
outer CV level, with inner CV supplying the candidate thresholds.

Cost-sensitive calibration instead reweights the training losses with
``c_pos = C * (2 - t)``, ``c_neg = C * t`` and picks the ``(C, t)`` pair with
the best pooled out-of-fold F1 under the plain sign rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed
from .data import FoldPlan, SparseDataset, make_folds
from .solver import DEFAULT_TOLERANCE, BinaryProblem, train_binary
from .trainer import (OvRModel, Provenance, default_c_grid, _fold_views,
                      _parallel, _pooled_f1)

logger = logging.getLogger(__name__)

DEFAULT_FBR_CANDIDATES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_INNER_FOLDS = 3


@dataclass
class ThresholdResult:
    """Per-label thresholding outcome: final shift and fold diagnostics."""

    label_index: int
    delta: float
    per_fold_deltas: list[float]
    fbr_used: float
    per_fold_f1: list[float] | None = None


@dataclass(frozen=True)
class CostGrid:
    """(C, t) candidate pairs plus the fold policy used to score them."""

    pairs: tuple[tuple[float, float], ...]
    fold_policy: str = "shared-folds"
    tag: str = "cost-sensitive"

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("empty cost grid")
        for C, t in self.pairs:
            if C <= 0:
                raise ValueError("C values must be positive")
            if not 0.0 < t <= 1.0:
                raise ValueError("t values must be in (0, 1]")
        if self.fold_policy not in ("shared-folds", "refold-per-pair"):
            raise ValueError(f"unknown fold policy {self.fold_policy!r}")

    def describe(self) -> str:
        return f"{self.tag}:{self.fold_policy}:{len(self.pairs)} pairs"


@dataclass
class CostChoice:
    """Per-label selected (C, t) pair and its CV score."""

    label_index: int
    C: float
    t: float
    cv_f1: float
    fallback_used: bool = False


def build_cost_grid(kind: str) -> CostGrid:
    """``dense``: t in {0.1..1.0} x the default C grid, refolded per pair.
    ``simple``: t = i/7, C in {0.01, 0.1, 1, 10, 100}/t, shared folds."""
    if kind == "dense":
        pairs = tuple((C, t) for t in (k / 10 for k in range(1, 11))
                      for C in default_c_grid().values)
        return CostGrid(pairs, "refold-per-pair", "cost-sensitive")
    if kind == "simple":
        pairs = tuple((base / t, t) for t in (i / 7 for i in range(1, 8))
                      for base in (0.01, 0.1, 1.0, 10.0, 100.0))
        return CostGrid(pairs, "shared-folds", "cost-sensitive-simple")
    raise ValueError(f"unknown cost grid kind {kind!r}")


def sweep_threshold(dec_values) -> tuple[float, float]:
    """Best additive shift for one label's validation decision values.

    ``dec_values`` is a sequence of ``(value, is_positive)`` pairs.  Returns
    ``(delta, best_f1)`` where predicting positive iff ``value + delta >= 0``
    maximizes F1 over the candidate cuts; F1 ties keep the cut predicting the
    fewest positives.
    """
    pairs = list(dec_values)
    if not pairs:
        raise ValueError("empty decision value list")
    values = np.asarray([v for v, _ in pairs], dtype=np.float64)
    flags = np.asarray([bool(p) for _, p in pairs])
    return _sweep(values, flags)


def _sweep(values: np.ndarray, flags: np.ndarray) -> tuple[float, float]:
    total_pos = int(np.sum(flags))
    vmax = float(np.max(values))
    if total_pos == 0:
        return -(vmax + 1.0), 0.0
    order = np.argsort(-values, kind="stable")
    sv, sf = values[order], flags[order]
    # distinct values descending, with cumulative predicted/true-positive counts
    distinct: list[float] = []
    pp_at: list[int] = []
    tp_at: list[int] = []
    pp = tp = 0
    for v, f in zip(sv, sf):
        pp += 1
        tp += int(f)
        if distinct and distinct[-1] == v:
            pp_at[-1], tp_at[-1] = pp, tp
        else:
            distinct.append(float(v))
            pp_at.append(pp)
            tp_at.append(tp)
    # candidate cuts from fewest to most predicted positives
    best_threshold = vmax + 1.0
    best_f1 = 0.0
    for i in range(len(distinct)):
        if i + 1 < len(distinct):
            threshold = (distinct[i] + distinct[i + 1]) / 2.0
        else:
            threshold = distinct[-1] - 1.0
        f1 = 2.0 * tp_at[i] / (pp_at[i] + total_pos)
        if f1 > best_f1:
            best_f1 = f1
            best_threshold = threshold
    return -best_threshold, best_f1


@dataclass
class _InnerEntry:
    delta: float
    f1: float
    max_dec: float


def _fbr_delta(entries: list[_InnerEntry], fbr: float) -> float:
    if not entries:
        return 0.0
    folds = [e.delta if e.f1 >= fbr else -e.max_dec for e in entries]
    return float(np.mean(folds))


def calibrate_thresholding(train: SparseDataset, C: float = 1.0,
                           fbr_candidates=DEFAULT_FBR_CANDIDATES,
                           outer_folds: FoldPlan | None = None,
                           inner_folds_k: int = DEFAULT_INNER_FOLDS,
                           seed: int = 0, outer_k: int = 5,
                           tolerance: float = DEFAULT_TOLERANCE,
                           n_jobs: int = 1) -> OvRModel:
    """Two-level CV thresholding at fixed C; returns a delta-shifted OvR model."""
    fbr_candidates = tuple(sorted(set(fbr_candidates)))
    if not fbr_candidates:
        raise ValueError("need at least one fbr candidate")
    if any(not 0.0 <= f <= 1.0 for f in fbr_candidates):
        raise ValueError("fbr candidates must lie in [0, 1]")
    if outer_folds is None:
        outer_folds = make_folds(train.n_instances, outer_k, seed)
    outer_views = _fold_views(train, outer_folds)
    inner_views = []
    for f, view in enumerate(outer_views):
        plan = make_folds(len(view.train_idx), inner_folds_k,
                          derive_seed(outer_folds.seed, f))
        X_outer_train = view.train_X
        per_fold = []
        for g in range(plan.k):
            tr = np.asarray(plan.complement_indices(g), dtype=np.intp)
            va = np.asarray(plan.fold_indices(g), dtype=np.intp)
            per_fold.append((X_outer_train[tr], X_outer_train[va], tr, va))
        inner_views.append(per_fold)

    X_full = train.feature_matrix()
    ys = [train.y_for_label(j) for j in range(train.n_labels)]

    def one(label):
        y = ys[label]
        if not np.any(y > 0):
            model = train_binary(BinaryProblem(X_full, y, label_index=label),
                                 C=C, tolerance=tolerance)
            return model, ThresholdResult(label, 0.0, [], max(fbr_candidates), [])

        fold_entries: list[tuple[np.ndarray, np.ndarray, list[_InnerEntry],
                                 float, float, float] | None] = []
        for f, view in enumerate(outer_views):
            y_tr = y[view.train_idx]
            y_va = y[view.val_idx]
            m_f = train_binary(BinaryProblem(view.train_X, y_tr, label_index=label),
                               C=C, tolerance=tolerance)
            if m_f.always_negative:
                fold_entries.append(None)
                continue
            inner_entries = []
            for X_in_tr, X_in_va, tr, va in inner_views[f]:
                m_in = train_binary(BinaryProblem(X_in_tr, y_tr[tr], label_index=label),
                                    C=C, tolerance=tolerance)
                if m_in.always_negative:
                    continue
                dec = m_in.decision_values(X_in_va)
                delta_in, f1_in = _sweep(dec, y_tr[va] > 0)
                inner_entries.append(_InnerEntry(delta_in, f1_in, float(np.max(dec))))
            dec_f = m_f.decision_values(view.val_X)
            sweep_delta, sweep_f1 = _sweep(dec_f, y_va > 0)
            fold_entries.append((dec_f, y_va, inner_entries, sweep_delta,
                                 sweep_f1, float(np.max(dec_f))))

        best_fbr = fbr_candidates[0]
        best_f1 = -1.0
        for fbr in fbr_candidates:
            tp = fp = fn = 0
            for f, entry in enumerate(fold_entries):
                y_va = y[outer_views[f].val_idx]
                actual = y_va > 0
                if entry is None:
                    fn += int(np.sum(actual))
                    continue
                dec_f, _, inner_entries, *_ = entry
                pred = dec_f + _fbr_delta(inner_entries, fbr) >= 0.0
                tp += int(np.sum(pred & actual))
                fp += int(np.sum(pred & ~actual))
                fn += int(np.sum(~pred & actual))
            f1 = _pooled_f1(tp, fp, fn)
            if f1 >= best_f1:  # ties keep the largest (most conservative) fbr
                best_f1 = f1
                best_fbr = fbr

        per_fold_deltas = []
        per_fold_f1 = []
        for entry in fold_entries:
            if entry is None:
                continue
            _, _, _, sweep_delta, sweep_f1, max_dec = entry
            per_fold_deltas.append(sweep_delta if sweep_f1 >= best_fbr else -max_dec)
            per_fold_f1.append(sweep_f1)
        delta = float(np.mean(per_fold_deltas)) if per_fold_deltas else 0.0
        model = train_binary(BinaryProblem(X_full, y, label_index=label), C=C,
                             tolerance=tolerance).with_delta(delta)
        return model, ThresholdResult(label, delta, per_fold_deltas, best_fbr, per_fold_f1)

    results = _parallel(n_jobs, [(one, (j,)) for j in range(train.n_labels)])
    models = [m for m, _ in results]
    report = [r for _, r in results]
    return OvRModel(models, "thresholding",
                    Provenance(seed=outer_folds.seed, fold_digest=outer_folds.digest(),
                               grid=f"C={C!r} fbr={list(fbr_candidates)!r} "
                                    f"inner_k={inner_folds_k}"),
                    n_features=train.n_features, calibration=report)


def _score_pair_on_views(label_y, views, C, t, tolerance, warm_models=None):
    """Pooled confusion counts for one (C, t) pair; optionally warm-started."""
    tp = fp = fn = 0
    next_warm = []
    for i, view in enumerate(views):
        y_tr = label_y[view.train_idx]
        y_va = label_y[view.val_idx]
        problem = BinaryProblem(view.train_X, y_tr)
        warm = warm_models[i] if warm_models else None
        model = train_binary(problem, C=C, t=t, tolerance=tolerance, warm_start=warm)
        next_warm.append(model)
        pred = model.decision_values(view.val_X) >= 0.0
        actual = y_va > 0
        tp += int(np.sum(pred & actual))
        fp += int(np.sum(pred & ~actual))
        fn += int(np.sum(~pred & actual))
    return tp, fp, fn, next_warm


def _select_pair(pairs, scores) -> tuple[float, float, float, bool]:
    best = None
    best_f1 = -1.0
    for pair, f1 in zip(pairs, scores):
        if f1 > best_f1:
            best, best_f1 = pair, f1
    if best_f1 == 0.0:
        return 1.0, 1.0, 0.0, True
    return best[0], best[1], best_f1, False


def calibrate_cost_sensitive(train: SparseDataset, grid: CostGrid,
                             folds: FoldPlan | None = None,
                             seed: int = 0, k: int = 5,
                             tolerance: float = DEFAULT_TOLERANCE,
                             n_jobs: int = 1) -> OvRModel:
    """Select (C, t) per label by pooled out-of-fold F1, then refit on all data.

    With ``shared-folds`` every pair is scored on the same FoldPlan and the
    C path within each t group is warm-started; ``refold-per-pair`` draws a
    fresh deterministic FoldPlan per pair (no warm start is possible then).
    """
    if folds is None:
        folds = make_folds(train.n_instances, k, seed)
    labels = range(train.n_labels)
    ys = {j: train.y_for_label(j) for j in labels}
    active = [j for j in labels if np.any(ys[j] > 0)]
    scores = {j: [] for j in active}

    if grid.fold_policy == "shared-folds":
        views = _fold_views(train, folds)

        def score_label(j):
            out = []
            warm = None
            prev_t = None
            for C, t in grid.pairs:
                if t != prev_t:
                    warm = None  # warm start only along the C path within one t
                    prev_t = t
                tp, fp, fn, warm = _score_pair_on_views(
                    ys[j], views, C, t, tolerance, warm)
                out.append(_pooled_f1(tp, fp, fn))
            return out

        results = _parallel(n_jobs, [(score_label, (j,)) for j in active])
        for j, out in zip(active, results):
            scores[j] = out
    else:
        for p, (C, t) in enumerate(grid.pairs):
            pair_folds = make_folds(train.n_instances, folds.k,
                                    derive_seed(folds.seed, p))
            views = _fold_views(train, pair_folds)

            def score_one(j):
                tp, fp, fn, _ = _score_pair_on_views(
                    ys[j], views, C, t, tolerance)
                return _pooled_f1(tp, fp, fn)

            results = _parallel(n_jobs, [(score_one, (j,)) for j in active])
            for j, f1 in zip(active, results):
                scores[j].append(f1)

    models = []
    choices = []
    for j in labels:
        if j not in scores:
            C, t, cv_f1, fb = 1.0, 1.0, 0.0, True
        else:
            C, t, cv_f1, fb = _select_pair(grid.pairs, scores[j])
        model = train_binary(BinaryProblem.for_label(train, j), C=C, t=t,
                             tolerance=tolerance)
        models.append(model)
        choices.append(CostChoice(j, C, t, cv_f1, fb))
    return OvRModel(models, grid.tag,
                    Provenance(seed=folds.seed, fold_digest=folds.digest(),
                               grid=grid.describe()),
                    n_features=train.n_features, calibration=choices)


def write_calibration_report(entries, path) -> None:
    """Line-oriented audit report for threshold or cost-sensitive calibration."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for e in entries:
            if isinstance(e, ThresholdResult):
                folds = ",".join(repr(d) for d in e.per_fold_deltas)
                f1s = ",".join(repr(v) for v in (e.per_fold_f1 or []))
                fh.write(f"label={e.label_index} delta={e.delta!r} fbr={e.fbr_used!r} "
                         f"fold_deltas=[{folds}] fold_f1=[{f1s}]\n")
            elif isinstance(e, CostChoice):
                fh.write(f"label={e.label_index} C={e.C!r} t={e.t!r} "
                         f"cv_f1={e.cv_f1!r} fallback={int(e.fallback_used)}\n")
            else:  # basic-C tuples: (label, C, cv_f1, fallback)
                fh.write(f"label={e[0]} C={e[1]!r} cv_f1={e[2]!r} fallback={int(e[3])}\n")
