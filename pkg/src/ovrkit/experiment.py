"""Benchmark protocol runner: seeded 80/20 splits shared across feature sets.

For every (feature file x method) combination the runner trains on each
seeded split, evaluates on the held-out portion, and aggregates mean and
standard deviation over seeds.  The same SplitPlan (same seed, same instance
count) is used for every feature file so representations are compared on
identical splits; the per-representation split digests are written to the
provenance file as proof.

Outputs in the output directory:

* ``results.json``  - aggregated and per-run metrics (byte-stable on reruns)
* ``results.tsv``   - long-format per-run metrics
* ``table.txt``     - methods x representations table (mean +/- std)
* ``figures.png``   - grouped bar chart of the table
* ``provenance.json`` - split/fold digests and the effective configuration
* ``timings.tsv``   - wall time per training/prediction phase (not part of
  the deterministic result set)
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, asdict
from pathlib import Path

from . import report
from .calibration import (build_cost_grid, calibrate_cost_sensitive,
                          calibrate_thresholding, DEFAULT_FBR_CANDIDATES,
                          DEFAULT_INNER_FOLDS)
from .data import make_folds, make_split, parse_dataset
from .metrics import evaluate
from .predict import (decision_matrix, predict_basic, predict_no_empty,
                      predict_unrealistic)
from .trainer import CGrid, default_c_grid, train_ovr_basic, train_ovr_basic_C

logger = logging.getLogger(__name__)

METHODS = ("unrealistic", "basic", "basic-C", "no-empty", "thresholding",
           "cost-sensitive", "cost-sensitive-simple", "cost-sensitive-no-empty")

# methods sharing one trained model are grouped under a single training key
_TRAIN_KEY = {
    "unrealistic": "basic", "basic": "basic", "no-empty": "basic",
    "basic-C": "basic-C", "thresholding": "thresholding",
    "cost-sensitive": "cost-sensitive",
    "cost-sensitive-no-empty": "cost-sensitive",
    "cost-sensitive-simple": "cost-sensitive-simple",
}

DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass
class ExperimentConfig:
    """Declarative experiment manifest; every key can come from the config file."""

    features: dict[str, str]
    labels: str | None = None
    format: str = "pair"
    methods: tuple[str, ...] = ("basic", "no-empty")
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    train_fraction: float = 0.8
    k_folds: int = 5
    inner_folds: int = DEFAULT_INNER_FOLDS
    fixed_C: float = 1.0
    c_grid: tuple[float, ...] | None = None
    fbr_candidates: tuple[float, ...] = DEFAULT_FBR_CANDIDATES
    precision_k: int | None = None
    allow_ground_truth: bool = False
    normalize: bool = False
    one_based: bool = False
    tolerance: float = 1e-4
    n_jobs: int = 1
    parallel_seeds: bool = False
    output: str = "results"

    KEYS = ("features", "labels", "format", "methods", "seeds", "train_fraction",
            "k_folds", "inner_folds", "fixed_C", "c_grid", "fbr_candidates",
            "precision_k", "allow_ground_truth", "normalize", "one_based",
            "tolerance", "n_jobs", "parallel_seeds", "output")

    def __post_init__(self):
        if not self.features:
            raise ValueError("experiment needs at least one feature file")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; choose from {METHODS}")
        if "unrealistic" in self.methods and not self.allow_ground_truth:
            raise ValueError(
                "the unrealistic method consumes ground-truth label counts; "
                "set allow_ground_truth to acknowledge this")
        if self.format == "pair" and self.labels is None:
            raise ValueError("pair format requires a shared label file")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("methods", "seeds", "fbr_candidates", "c_grid"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def effective(self) -> dict:
        out = asdict(self)
        for key in ("methods", "seeds", "fbr_candidates", "c_grid"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out


@dataclass
class ExperimentResult:
    records: list[dict]
    aggregates: dict
    split_digests: dict[str, dict[int, str]]
    methods: list[str]
    representations: list[str]

    def aggregates_json(self) -> dict:
        return {f"{method}|{rep}": metrics
                for (method, rep), metrics in sorted(self.aggregates.items())}


def _load_datasets(config: ExperimentConfig) -> dict[str, object]:
    datasets = {}
    for name, path in config.features.items():
        ds = parse_dataset(path, format=config.format, label_path=config.labels,
                           one_based=config.one_based)
        if config.normalize:
            ds = ds.l2_normalized()
        datasets[name] = ds
    sizes = {name: ds.n_instances for name, ds in datasets.items()}
    if len(set(sizes.values())) != 1:
        raise ValueError(f"feature files disagree on instance count: {sizes}")
    n_labels = {name: ds.n_labels for name, ds in datasets.items()}
    if len(set(n_labels.values())) != 1:
        raise ValueError(f"feature files disagree on label count: {n_labels}")
    first = next(iter(datasets.values()))
    for name, ds in datasets.items():
        if ds.label_sets != first.label_sets:
            raise ValueError(
                f"feature file {name!r} carries different label sets; "
                "representations must share one labeling")
    return datasets


def _train_for_key(key: str, train_ds, config: ExperimentConfig, seed: int):
    folds = make_folds(train_ds.n_instances, config.k_folds, seed)
    grid = CGrid(config.c_grid) if config.c_grid else default_c_grid()
    if key == "basic":
        return train_ovr_basic(train_ds, C=config.fixed_C,
                               tolerance=config.tolerance, n_jobs=config.n_jobs)
    if key == "basic-C":
        return train_ovr_basic_C(train_ds, grid=grid, folds=folds,
                                 tolerance=config.tolerance, n_jobs=config.n_jobs)
    if key == "thresholding":
        return calibrate_thresholding(
            train_ds, C=config.fixed_C, fbr_candidates=config.fbr_candidates,
            outer_folds=folds, inner_folds_k=config.inner_folds,
            tolerance=config.tolerance, n_jobs=config.n_jobs)
    if key == "cost-sensitive":
        return calibrate_cost_sensitive(train_ds, build_cost_grid("dense"),
                                        folds=folds, tolerance=config.tolerance,
                                        n_jobs=config.n_jobs)
    if key == "cost-sensitive-simple":
        return calibrate_cost_sensitive(train_ds, build_cost_grid("simple"),
                                        folds=folds, tolerance=config.tolerance,
                                        n_jobs=config.n_jobs)
    raise ValueError(f"unknown training key {key!r}")


def _predict_for_method(method: str, model, test_ds):
    decisions = decision_matrix(model, test_ds)
    if method == "unrealistic":
        # the gate was acknowledged in the config; the audit warning still fires
        return predict_unrealistic(decisions, test_ds.label_counts())
    if method in ("no-empty", "cost-sensitive-no-empty"):
        tag = method if method != "no-empty" else "no-empty"
        return predict_no_empty(decisions, strategy=tag)
    if method == "thresholding":
        return predict_basic(decisions, strategy="as-calibrated")
    return predict_basic(decisions, strategy=method)


def run_experiment(config: ExperimentConfig, out_dir=None,
                   figures: bool = True) -> ExperimentResult:
    out = Path(out_dir if out_dir is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    datasets = _load_datasets(config)
    representations = list(datasets)
    n_instances = next(iter(datasets.values())).n_instances

    splits = {seed: make_split(n_instances, seed, config.train_fraction)
              for seed in config.seeds}
    split_digests = {rep: {seed: splits[seed].digest() for seed in config.seeds}
                     for rep in representations}

    def one_seed(rep, seed):
        ds = datasets[rep]
        plan = splits[seed]
        train_ds = ds.subset(plan.train_indices)
        test_ds = ds.subset(plan.test_indices)
        seed_records, seed_timings = [], []
        models = {}
        for method in config.methods:
            key = _TRAIN_KEY[method]
            if key not in models:
                t0 = time.perf_counter()
                models[key] = _train_for_key(key, train_ds, config, seed)
                dt = time.perf_counter() - t0
                seed_timings.append((rep, seed, f"train:{key}", dt))
                logger.info("trained %s on %s seed %d in %.2fs", key, rep, seed, dt)
            t0 = time.perf_counter()
            pred = _predict_for_method(method, models[key], test_ds)
            rep_metrics = evaluate(test_ds.label_sets, pred,
                                   n_labels=ds.n_labels, k=config.precision_k)
            seed_timings.append((rep, seed, f"predict+eval:{method}",
                                 time.perf_counter() - t0))
            seed_records.append({"method": method, "representation": rep,
                                 "seed": seed, "metrics": rep_metrics.to_dict()})
        return seed_records, seed_timings

    tasks = [(rep, seed) for rep in representations for seed in config.seeds]
    if config.parallel_seeds:
        from joblib import Parallel, delayed
        outcomes = Parallel(n_jobs=config.n_jobs if config.n_jobs > 1 else -1)(
            delayed(one_seed)(rep, seed) for rep, seed in tasks)
    else:
        outcomes = [one_seed(rep, seed) for rep, seed in tasks]
    records = []
    timings = []
    for seed_records, seed_timings in outcomes:  # reduced in task order
        records.extend(seed_records)
        timings.extend(seed_timings)

    metric_keys = ("macro_f1", "micro_f1", "instance_f1", "micro_upper_bound")
    aggregates = {}
    for method in config.methods:
        for rep in representations:
            runs = [r["metrics"] for r in records
                    if r["method"] == method and r["representation"] == rep]
            agg = {}
            for mk in metric_keys:
                values = [r[mk] for r in runs]
                mean = sum(values) / len(values)
                if len(values) > 1:
                    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
                    std = var ** 0.5
                else:
                    std = 0.0
                agg[mk] = {"mean": mean, "std": std, "runs": values}
            aggregates[(method, rep)] = agg

    result = ExperimentResult(records, aggregates, split_digests,
                              list(config.methods), representations)

    payload = {"config": config.effective(),
               "aggregates": result.aggregates_json(),
               "runs": records,
               "split_digests": split_digests}
    (out / "results.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    report.write_results_tsv(records, out / "results.tsv")
    (out / "table.txt").write_text(
        report.render_method_table(result.methods, representations, aggregates),
        encoding="utf-8")
    (out / "provenance.json").write_text(
        json.dumps({"split_digests": split_digests,
                    "config": config.effective()}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    with open(out / "timings.tsv", "w", encoding="utf-8") as fh:
        fh.write("representation\tseed\tphase\tseconds\n")
        for rep, seed, phase, dt in timings:
            fh.write(f"{rep}\t{seed}\t{phase}\t{dt:.4f}\n")
    if figures:
        report.experiment_figure(result.methods, representations, aggregates,
                                 out / "figures.png")
    return result
