"""Command-line interface: ``hbx <subcommand> ...``.

Exit status is 0 on success, 2 on a usage error and 1 on a data or model error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import harness
from .batch import LONGEST_GAP, MID_DISTANCE, AggloConfig
from .core import ModelParams, TrainedModel
from .ensemble import ENSEMBLE_KINDS, EnsembleConfig, EnsembleModel, merge_models
from .explain import decision_boundary_grid, explain, parallel_coordinates_rows, rows_to_csv, rows_to_json
from .model_io import DEFAULT_MISSING, load_model, read_csv, save_model, write_csv
from .online import ONLINE_ALGORITHMS, OnlineFitConfig

ALGORITHMS = ONLINE_ALGORITHMS + ("agglo2",) + ENSEMBLE_KINDS


class UsageError(Exception):
    pass


def _probability(text):
    value = float(text)
    if not (0 <= value <= 1):
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _add_algo(p):
    g = p.add_argument_group("learner")
    g.add_argument("--algo", choices=ALGORITHMS, default="onln-gfmm")
    g.add_argument("--base", choices=ONLINE_ALGORITHMS + ("agglo2",), default="onln-gfmm",
                   help="base learner for ensembles")
    g.add_argument("--theta", type=float, default=0.1)
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--sigma-min", type=_probability, default=0.0)
    g.add_argument("--similarity", choices=(LONGEST_GAP, MID_DISTANCE), default=LONGEST_GAP)
    g.add_argument("--epochs", type=_positive_int, default=1)
    g.add_argument("--shuffle-seed", type=int, default=None)
    g.add_argument("--B", "--n-estimators", dest="B", type=_positive_int, default=10)
    g.add_argument("--sample-rate", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)


def _add_data(p, label_required=True):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label", required=label_required, default=None, help="name of the label column")
    p.add_argument("--missing", nargs="*", default=sorted(DEFAULT_MISSING),
                   help="cell values read as missing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbx", description="Hyperbox-based classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model and save it as JSON")
    _add_algo(p)
    _add_data(p)
    p.add_argument("--no-scale", action="store_true", help="data is already in [0, 1]")
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="write predictions for a CSV")
    p.add_argument("--model", required=True)
    _add_data(p, label_required=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="print the accuracy of a model on a labelled CSV")
    p.add_argument("--model", required=True)
    _add_data(p, label_required=False)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_algo(p)
    _add_data(p)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--k", type=int, default=5)

    p = sub.add_parser("gridsearch", help="exhaustive hyperparameter search with k-fold CV")
    _add_algo(p)
    _add_data(p)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--grid", action="append", required=True, metavar="NAME=V1,V2,...",
                   help="parameter values to search, e.g. theta=0.1,0.3,0.7 (repeatable)")

    p = sub.add_parser("prune", help="remove unreliable boxes using validation data")
    p.add_argument("--model", required=True)
    _add_data(p, label_required=False)
    p.add_argument("--min-acc", type=_probability, default=0.5)
    p.add_argument("--keep-unused", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("edit", help="drop training samples repeatedly misclassified under CV")
    _add_algo(p)
    _add_data(p)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="edited CSV")

    p = sub.add_parser("merge", help="merge the boxes of several models into one")
    p.add_argument("--models", nargs="+", required=True, help="single-model files or one ensemble file")
    p.add_argument("--theta", type=float, default=None, help="defaults to the largest member theta")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--sigma-min", type=_probability, default=0.0)
    p.add_argument("--similarity", choices=(LONGEST_GAP, MID_DISTANCE), default=LONGEST_GAP)
    p.add_argument("--out", required=True)

    p = sub.add_parser("explain", help="export winning boxes per class for one sample")
    p.add_argument("--model", required=True)
    _add_data(p, label_required=False)
    p.add_argument("--row", type=int, default=0, help="0-based data row to explain")
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)

    p = sub.add_parser("boundary", help="export a 2-D decision-boundary grid as JSON")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------

def make_config(args):
    try:
        params = ModelParams(args.theta, args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def base_config(name):
        if name == "agglo2":
            return AggloConfig(params, args.sigma_min, args.similarity)
        return OnlineFitConfig(params, name, args.epochs, args.shuffle_seed)

    if args.algo in ENSEMBLE_KINDS:
        if not (0 < args.sample_rate <= 1):
            raise UsageError("--sample-rate must lie in (0, 1]")
        if args.algo == "bagging-model-level" and args.base == "fmnn":
            raise UsageError("model-level bagging merges GFMM models; fmnn cannot be used as its base")
        return EnsembleConfig(base_config(args.base), args.algo, args.B, args.sample_rate, args.seed)
    return base_config(args.algo)


def _load_training(args):
    data, schema = read_csv(args.data, args.label, args.missing)
    scaler = None
    if not getattr(args, "no_scale", False):
        scaler = harness.scaler_fit(data.lower)
        data = harness.scale_dataset(scaler, data)
    data.validate()
    return data, schema, scaler


def _load_for_model(args, model):
    schema = model.schema
    label = args.label if args.label is not None else (schema.label_column if schema else None)
    has_label = False
    if label:
        with open(args.data, newline="") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        has_label = label in header
    data, _ = read_csv(args.data, label if has_label else None, args.missing, schema=schema if has_label else None)
    if schema is not None and not has_label and data.n_features != schema.n_features:
        raise ValueError(f"{args.data}: expected features {schema.feature_names}")
    raw = data
    if model.scaler is not None:
        data = harness.scale_dataset(model.scaler, data)
    return data, raw, has_label


def _class_name(model, label: int) -> str:
    if model.schema is not None:
        return model.schema.class_names().get(int(label), "")
    return str(int(label)) if label else ""


def _echo(args) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config " + json.dumps(resolved, sort_keys=True), file=sys.stderr)


def cmd_fit(args):
    cfg = make_config(args)
    data, schema, scaler = _load_training(args)
    model = harness.fit_model(data, cfg, threads=harness.n_threads())
    model.scaler = scaler
    model.schema = schema
    save_model(model, args.out)
    print(f"saved {args.out}: {harness.box_count(model)} boxes")


def cmd_predict(args):
    model = load_model(args.model)
    data, _, _ = _load_for_model(args, model)
    labels = harness.predict_labels(model, data)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "prediction"])
        for i, lab in enumerate(labels):
            writer.writerow([i, _class_name(model, lab)])
    print(f"wrote {len(labels)} predictions to {args.out}")


def cmd_eval(args):
    model = load_model(args.model)
    data, _, has_label = _load_for_model(args, model)
    if not has_label:
        raise ValueError("evaluation needs a label column in the data")
    pred = harness.predict_labels(model, data)
    acc = harness.accuracy(data.labels, pred)
    print(f"correct={int(np.sum(pred == data.labels))} total={len(data)}")
    print(f"accuracy={acc:.6f}")


def cmd_cv(args):
    cfg = make_config(args)
    data, _, _ = _load_training(args)
    report = harness.cross_validate(data, cfg, args.k, args.seed)
    for i, (s, b) in enumerate(zip(report.fold_scores, report.box_counts)):
        print(f"fold {i}: accuracy={s:.6f} boxes={b}")
    print(f"mean={report.mean:.6f} std={report.std:.6f}")


def _parse_grid(items):
    grid = {}
    for item in items:
        name, _, values = item.partition("=")
        name = name.strip().replace("-", "_")
        if not values:
            raise UsageError(f"bad grid entry {item!r}; expected NAME=V1,V2")
        cast = int if name in ("epochs", "B") else float
        try:
            grid[name] = [cast(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad grid values in {item!r}") from None
    for theta in grid.get("theta", []):
        if not (0 < theta <= 1):
            raise UsageError(f"theta must lie in (0, 1], got {theta}")
    return grid


def cmd_gridsearch(args):
    cfg = make_config(args)
    grid = _parse_grid(args.grid)
    data, _, _ = _load_training(args)
    try:
        best, report = harness.grid_search(data, cfg, grid, args.k, args.seed)
    except TypeError as exc:
        raise UsageError(f"unknown grid parameter: {exc}") from None
    chosen = {name: getattr(best.params, name) if name in ("theta", "gamma") else getattr(best, name) for name in grid}
    print("best " + json.dumps(chosen, sort_keys=True))
    print(f"mean={report.mean:.6f} std={report.std:.6f}")


def cmd_prune(args):
    model = load_model(args.model)
    if not isinstance(model, TrainedModel):
        raise ValueError("pruning applies to single models")
    data, _, has_label = _load_for_model(args, model)
    if not has_label:
        raise ValueError("pruning needs labelled validation data")
    pruned = harness.prune(model, data, args.min_acc, args.keep_unused)
    save_model(pruned, args.out)
    print(f"pruned {len(model) - len(pruned)} of {len(model)} boxes; saved {args.out}")


def cmd_edit(args):
    if not (0 <= args.threshold <= 1):
        raise UsageError("--threshold must lie in [0, 1]")
    cfg = make_config(args)
    raw, schema = read_csv(args.data, args.label, args.missing)
    data, _, _ = _load_training(args)
    _, keep = harness.edit_samples(data, cfg, args.k, args.repeats, args.threshold, args.seed)
    write_csv(args.out, raw.lower[keep], raw.labels[keep], schema)
    print(f"removed {int((~keep).sum())} of {len(keep)} samples; wrote {args.out}")


def cmd_merge(args):
    loaded = [load_model(p) for p in args.models]
    if len(loaded) == 1 and isinstance(loaded[0], EnsembleModel):
        ens = loaded[0]
        if any(len(s) != ens.n_features for s in ens.feature_subsets):
            raise ValueError("only ensembles trained on all features can be merged")
        members, scaler, schema = ens.members, ens.scaler, ens.schema
    else:
        if any(not isinstance(m, TrainedModel) for m in loaded):
            raise ValueError("pass several single-model files or exactly one ensemble file")
        members, scaler, schema = loaded, loaded[0].scaler, loaded[0].schema
        for m in loaded[1:]:
            same = (m.scaler is None) == (scaler is None) and (
                scaler is None or (np.array_equal(m.scaler.min, scaler.min) and np.array_equal(m.scaler.range, scaler.range))
            )
            if not same:
                raise ValueError("models were trained with different scalers and cannot be merged")
    theta = args.theta if args.theta is not None else max(m.params.theta for m in members)
    gamma = args.gamma if args.gamma is not None else members[0].params.gamma
    try:
        cfg = AggloConfig(ModelParams(theta, gamma), args.sigma_min, args.similarity)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    merged = merge_models(members, cfg)
    merged.scaler, merged.schema = scaler, schema
    save_model(merged, args.out)
    print(f"merged {sum(len(m) for m in members)} boxes into {len(merged)}; saved {args.out}")


def cmd_explain(args):
    model = load_model(args.model)
    if not isinstance(model, TrainedModel):
        raise ValueError("explanations are produced for single models")
    data, _, _ = _load_for_model(args, model)
    if not (0 <= args.row < len(data)):
        raise UsageError(f"--row must lie in [0, {len(data) - 1}]")
    expl = explain(model, data.sample(args.row))
    rows = parallel_coordinates_rows(expl)
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            fh.write(rows_to_csv(rows))
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(rows_to_json(rows) + "\n")
    print(json.dumps(expl.to_dict(), indent=1))


def cmd_boundary(args):
    model = load_model(args.model)
    if not isinstance(model, TrainedModel):
        raise ValueError("decision boundaries are exported for single models")
    doc = decision_boundary_grid(model, args.resolution)
    with open(args.out, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    print(f"wrote {args.resolution}x{args.resolution} grid to {args.out}")


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "gridsearch": cmd_gridsearch,
    "prune": cmd_prune,
    "edit": cmd_edit,
    "merge": cmd_merge,
    "explain": cmd_explain,
    "boundary": cmd_boundary,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _echo(args)
    try:
        harness.n_threads()
    except ValueError as exc:
        print(f"hbx: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hbx {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"hbx {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
