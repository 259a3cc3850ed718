"""Batch command-line interface.

Commands: ``split``, ``train``, ``predict``, ``eval``, ``experiment``,
``verify``.  Exit codes: 0 success, 1 verification/assertion failure,
2 usage or data error.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click

from . import report as report_mod
from . import theory
from .calibration import (build_cost_grid, calibrate_cost_sensitive,
                          calibrate_thresholding, write_calibration_report,
                          DEFAULT_FBR_CANDIDATES)
from .data import (DataFormatError, SparseDataset, make_folds, make_split,
                   parse_dataset, parse_label_file, save_folds, save_split)
from .metrics import evaluate
from .predict import (decision_matrix, dump_decisions, dump_predictions,
                      load_decisions, load_predictions, predict_basic,
                      predict_no_empty, predict_top_k, predict_unrealistic,
                      read_dump_strategy)
from .solver import ConvergenceError
from .trainer import (CGrid, default_c_grid, load_model, save_model,
                      train_ovr_basic, train_ovr_basic_C)
from .experiment import ExperimentConfig, run_experiment

logger = logging.getLogger("ovrkit")

TRAIN_STRATEGIES = ("basic", "basic-C", "thresholding", "cost-sensitive",
                    "cost-sensitive-simple", "unrealistic")
PREDICT_STRATEGIES = ("basic", "no-empty", "top-k", "unrealistic")


class DataError(click.ClickException):
    exit_code = 2


def _guard(fn):
    """Map library errors to exit code 2 with a clean message."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DataFormatError, ConvergenceError, ValueError, OSError) as exc:
            raise DataError(str(exc)) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_features_only(path) -> SparseDataset:
    """Dense feature file with no labels (prediction-time input)."""
    rows = []
    width = None
    with open(str(path), "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens:
                raise DataFormatError("blank feature row", str(path), lineno)
            values = [float(t) for t in tokens]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataFormatError("ragged feature rows", str(path), lineno)
            rows.append([(j, v) for j, v in enumerate(values) if v != 0.0])
    return SparseDataset(len(rows), width, 0, rows, [()] * len(rows))


def _read_dataset(data, format, labels, one_based, normalize=False) -> SparseDataset:
    if format == "pair" and labels is None:
        ds = _load_features_only(data)
    else:
        ds = parse_dataset(data, format=format, label_path=labels,
                           one_based=one_based)
    return ds.l2_normalized() if normalize else ds


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


data_opts = [
    click.option("--data", required=True, type=click.Path(exists=True),
                 help="Dataset file (svmlight) or dense feature file (pair)."),
    click.option("--format", "fmt", type=click.Choice(["svmlight", "pair"]),
                 default="svmlight", show_default=True),
    click.option("--labels", type=click.Path(exists=True), default=None,
                 help="Row-aligned label file (pair format)."),
    click.option("--one-based", is_flag=True, help="Indices in files count from 1."),
    click.option("--normalize", is_flag=True, help="L2-normalize each instance."),
]


def _add_opts(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """One-vs-rest multi-label training, calibration, and evaluation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


@main.command()
@_add_opts(data_opts)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Split plan output path.")
@click.option("--k-folds", type=int, default=None,
              help="Also write a fold plan over the training portion.")
@click.option("--folds-out", type=click.Path(), default=None)
@_guard
def split(data, fmt, labels, one_based, normalize, seed, train_fraction, out,
          k_folds, folds_out):
    """Write a deterministic train/test split plan (and optional fold plan)."""
    ds = _read_dataset(data, fmt, labels, one_based, normalize)
    plan = make_split(ds.n_instances, seed, train_fraction)
    save_split(plan, out)
    click.echo(f"split: {len(plan.train_indices)} train / {len(plan.test_indices)} test "
               f"-> {out} (digest {plan.digest()})")
    if k_folds:
        folds = make_folds(len(plan.train_indices), k_folds, seed)
        target = folds_out or (str(out) + ".folds")
        save_folds(folds, target)
        click.echo(f"folds: k={k_folds} -> {target} (digest {folds.digest()})")


@main.command()
@_add_opts(data_opts)
@click.option("--strategy", type=click.Choice(TRAIN_STRATEGIES), default="basic",
              show_default=True)
@click.option("--model", "model_out", required=True, type=click.Path(),
              help="Model file output path.")
@click.option("--C", "c_value", type=float, default=1.0, show_default=True,
              help="Fixed C for basic/thresholding.")
@click.option("--c-grid", default=None,
              help="Comma-separated C values for basic-C (default: 2^-10..2^10).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--k-folds", type=int, default=5, show_default=True)
@click.option("--inner-folds", type=int, default=3, show_default=True)
@click.option("--fbr", default=None,
              help="Comma-separated fbr candidates (default 0,0.1,...,0.5).")
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--allow-ground-truth", is_flag=True,
              help="Required for --strategy unrealistic (prediction-time leak).")
@click.option("--calibration-report", "calib_out", type=click.Path(), default=None)
@_guard
def train(data, fmt, labels, one_based, normalize, strategy, model_out, c_value,
          c_grid, seed, k_folds, inner_folds, fbr, tolerance, jobs,
          allow_ground_truth, calib_out):
    """Train a one-vs-rest model under the chosen strategy."""
    ds = _read_dataset(data, fmt, labels, one_based, normalize)
    if ds.n_labels == 0:
        raise DataError("training data has no labels")
    if strategy == "unrealistic":
        # training is plain one-vs-rest; the leak happens at prediction time,
        # so demand the acknowledgement up front
        if not allow_ground_truth:
            raise DataError("the unrealistic method consumes ground-truth label "
                            "counts at prediction time; pass --allow-ground-truth")
        strategy = "basic"
        click.echo("note: unrealistic uses plain one-vs-rest training; predict "
                   "with --strategy unrealistic --allow-ground-truth", err=True)
    folds = make_folds(ds.n_instances, k_folds, seed)
    t0 = time.perf_counter()
    if strategy == "basic":
        model = train_ovr_basic(ds, C=c_value, tolerance=tolerance, n_jobs=jobs)
    elif strategy == "basic-C":
        grid = CGrid(_parse_float_list(c_grid)) if c_grid else default_c_grid()
        model = train_ovr_basic_C(ds, grid=grid, folds=folds,
                                  tolerance=tolerance, n_jobs=jobs)
    elif strategy == "thresholding":
        candidates = _parse_float_list(fbr) if fbr else DEFAULT_FBR_CANDIDATES
        model = calibrate_thresholding(ds, C=c_value, fbr_candidates=candidates,
                                       outer_folds=folds, inner_folds_k=inner_folds,
                                       tolerance=tolerance, n_jobs=jobs)
    else:
        kind = "dense" if strategy == "cost-sensitive" else "simple"
        model = calibrate_cost_sensitive(ds, build_cost_grid(kind), folds=folds,
                                         tolerance=tolerance, n_jobs=jobs)
    elapsed = time.perf_counter() - t0
    model.provenance.seed = seed
    save_model(model, model_out)
    logger.info("train phase: %.2fs (%d labels, strategy %s)",
                elapsed, ds.n_labels, strategy)
    click.echo(f"trained {ds.n_labels} labels [{strategy}] in {elapsed:.2f}s -> {model_out}")
    if model.calibration is not None and calib_out is None:
        calib_out = str(model_out) + ".calib.txt"
    if calib_out:
        write_calibration_report(model.calibration or [], calib_out)
        click.echo(f"calibration report -> {calib_out}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@_add_opts(data_opts)
@click.option("--strategy", type=click.Choice(PREDICT_STRATEGIES), default="basic",
              show_default=True)
@click.option("--k", type=int, default=1, show_default=True, help="k for top-k.")
@click.option("--allow-ground-truth", is_flag=True,
              help="Acknowledge that 'unrealistic' reads true label counts.")
@click.option("--truth", type=click.Path(exists=True), default=None,
              help="Label file supplying true counts for 'unrealistic'.")
@click.option("--out", "pred_out", required=True, type=click.Path())
@click.option("--decisions-out", type=click.Path(), default=None,
              help="Also dump the decision-value matrix as TSV.")
@_guard
def predict(model_path, data, fmt, labels, one_based, normalize, strategy, k,
            allow_ground_truth, truth, pred_out, decisions_out):
    """Predict label subsets for test instances."""
    model = load_model(model_path)
    # label vocab in a test file doesn't have to match the model's; only the
    # feature dimension is checked (by decision_matrix)
    ds = _read_dataset(data, fmt, labels, one_based, normalize)
    t0 = time.perf_counter()
    decisions = decision_matrix(model, ds)
    if strategy == "unrealistic":
        if not allow_ground_truth:
            raise DataError("unrealistic prediction requires --allow-ground-truth "
                            "(it consumes true label counts)")
        if truth is not None:
            counts = [len(s) for s in parse_label_file(truth, one_based=one_based)]
        elif fmt == "svmlight" or labels is not None:
            counts = ds.label_counts()
        else:
            raise DataError("unrealistic prediction needs --truth or labeled data")
        click.echo("warning: predictions consumed ground-truth label counts", err=True)
        pred = predict_unrealistic(decisions, counts)
    elif strategy == "no-empty":
        pred = predict_no_empty(decisions)
    elif strategy == "top-k":
        pred = predict_top_k(decisions, k)
    else:
        pred = predict_basic(decisions)
    dump_predictions(pred, pred_out)
    if decisions_out:
        dump_decisions(decisions, decisions_out)
    logger.info("predict phase: %.2fs (%d instances)",
                time.perf_counter() - t0, ds.n_instances)
    click.echo(f"{ds.n_instances} predictions [{pred.strategy}] -> {pred_out}")


@main.command(name="eval")
@click.option("--truth", required=True, type=click.Path(exists=True),
              help="Label file or svmlight dataset with ground truth.")
@click.option("--truth-format", type=click.Choice(["labels", "svmlight"]),
              default="labels", show_default=True)
@click.option("--pred", required=True, type=click.Path(exists=True),
              help="Prediction dump from `ovrkit predict`.")
@click.option("--decisions", type=click.Path(exists=True), default=None,
              help="Decision TSV (enables precision@k).")
@click.option("--k", type=int, default=None, help="k for precision@k.")
@click.option("--n-labels", type=int, default=None,
              help="Label vocabulary size (default: max index + 1).")
@click.option("--one-based", is_flag=True)
@click.option("--out", "json_out", type=click.Path(), default=None)
@_guard
def eval_cmd(truth, truth_format, pred, decisions, k, n_labels, one_based, json_out):
    """Score predictions against ground truth; emits a metrics JSON."""
    if truth_format == "labels":
        truth_sets = parse_label_file(truth, one_based=one_based)
    else:
        truth_sets = parse_dataset(truth, format="svmlight",
                                   one_based=one_based).label_sets
    pred_sets = load_predictions(pred)
    if len(pred_sets) != len(truth_sets):
        raise DataError(f"{len(truth_sets)} truth rows vs {len(pred_sets)} predictions")
    dec = load_decisions(decisions) if decisions else None
    if dec is not None and dec.shape[0] != len(truth_sets):
        raise DataError("decision matrix row count does not match truth")
    nl = n_labels
    if nl is None:
        mx = max((max(s, default=-1) for s in list(truth_sets) + list(pred_sets)),
                 default=-1)
        nl = (mx + 1) if dec is None else max(mx + 1, dec.shape[1])
    rep = evaluate(truth_sets, pred_sets, n_labels=nl, decisions=dec, k=k,
                   strategy=read_dump_strategy(pred))
    text = rep.to_json()
    if json_out:
        Path(json_out).write_text(text, encoding="utf-8")
    click.echo(text, nl=False)
    if not rep.bound_satisfied():
        raise DataError("micro-F1 exceeded its size bound; inconsistent inputs")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML or JSON experiment manifest.")
@click.option("--features", default=None,
              help="name=path[,name=path...] feature files (overrides config).")
@click.option("--labels", type=click.Path(exists=True), default=None)
@click.option("--format", "fmt", type=click.Choice(["svmlight", "pair"]), default=None)
@click.option("--methods", default=None, help="Comma-separated method names.")
@click.option("--seeds", default=None, help="Comma-separated seeds.")
@click.option("--train-fraction", type=float, default=None)
@click.option("--k-folds", type=int, default=None)
@click.option("--allow-ground-truth", is_flag=True, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--output", type=click.Path(), default=None)
@click.option("--no-figures", is_flag=True)
@_guard
def experiment(config_path, features, labels, fmt, methods, seeds, train_fraction,
               k_folds, allow_ground_truth, jobs, output, no_figures):
    """Run the seeded multi-split benchmark protocol; flags override the config."""
    raw = {}
    if config_path:
        raw = _load_config_file(config_path)
    if features:
        raw["features"] = dict(item.split("=", 1) for item in features.split(","))
    if labels:
        raw["labels"] = labels
    if fmt:
        raw["format"] = fmt
    if methods:
        raw["methods"] = [m.strip() for m in methods.split(",")]
    if seeds:
        raw["seeds"] = list(_parse_int_list(seeds))
    if train_fraction is not None:
        raw["train_fraction"] = train_fraction
    if k_folds is not None:
        raw["k_folds"] = k_folds
    if allow_ground_truth:
        raw["allow_ground_truth"] = True
    if jobs is not None:
        raw["n_jobs"] = jobs
    if output is not None:
        raw["output"] = output
    cfg = ExperimentConfig.from_dict(raw)
    result = run_experiment(cfg, figures=not no_figures)
    click.echo(report_mod.render_method_table(result.methods,
                                              result.representations,
                                              result.aggregates))
    click.echo(f"outputs -> {cfg.output}")


def _load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        loaded = yaml.safe_load(text)
    else:
        loaded = json.loads(text)
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return loaded


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="verifyout",
              show_default=True,
              help="Directory for verify.json / verify.txt / overestimation.png.")
@click.option("--no-figures", is_flag=True)
@_guard
def verify(seed, trials, out_dir, no_figures):
    """Empirically check the three Micro-F1 results and run the audit demo."""
    t0 = time.perf_counter()
    reports = theory.run_all_checks(seed=seed, trials=trials)
    demo = theory.overestimation_demo(seed=seed)
    elapsed = time.perf_counter() - t0
    text = "\n".join(r.to_text() for r in reports)
    text += "\n\nover-estimation demo (Micro-F1 by noise level)\n" + demo.to_text() + "\n"
    payload = {"checks": [r.to_dict() for r in reports], "demo": demo.to_dict(),
               "seed": seed, "trials": trials}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (out / "verify.txt").write_text(text, encoding="utf-8")
    if not no_figures:
        report_mod.demo_figure(demo, out / "overestimation.png")
    click.echo(text)
    logger.info("verify phase: %.2fs", elapsed)
    if not all(r.passed for r in reports):
        click.echo("verification FAILED", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
