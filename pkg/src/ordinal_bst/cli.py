"""Command-line interface: ``ordinal-bst <command> [flags]``."""

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import data, metrics, model as model_mod, training
from .errors import (
    ConfigError,
    LabelError,
    OrdinalError,
    ParseError,
    SchemaError,
)
from .svg import SvgScatter

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Stage:
    """Tags exceptions escaping a block with the pipeline stage name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not hasattr(exc, "stage"):
            try:
                exc.stage = self.name
            except AttributeError:
                pass
        return False


def _parse_order(text):
    if text is None:
        return None
    return [v.strip() for v in text.split(",") if v.strip()]


def _load_config(args):
    config = training.TrainConfig.from_json_file(args.config) if args.config else training.TrainConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "hidden", None) is not None:
        config = replace(config, h_hidden=args.hidden)
    return config


def _fmt(v):
    return repr(float(v))


def cmd_synth(args):
    with _Stage("synthesize"):
        ds = data.synthesize(args.n, args.d, args.k, args.noise, args.seed)
    with _Stage("write"):
        data.write_csv(ds, args.out, target_column=args.target)
    print(f"wrote {len(ds)} rows to {args.out}")


def cmd_evaluate(args):
    with _Stage("config"):
        config = _load_config(args)
    with _Stage("load"):
        ds = data.load_csv(args.data, args.target, _parse_order(args.order))
    with _Stage("cross-validation"):
        report = metrics.cross_validate(ds, config, k_folds=args.folds,
                                        seed=args.seed if args.seed is not None else config.seed,
                                        n_resamples=args.resamples, level=args.level,
                                        jobs=args.jobs)
    with _Stage("write"):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(report.table())


def cmd_train(args):
    with _Stage("config"):
        config = _load_config(args)
    with _Stage("load"):
        ds = data.load_csv(args.data, args.target, _parse_order(args.order))
    with _Stage("train"):
        model, history = training.fit(ds, config)
    with _Stage("write"):
        model.save(args.out)
    print(f"trained {history.epochs} epochs, final loss {history.losses[-1]:.6f}; "
          f"model written to {args.out}")


def _feature_matrix(path, model, target):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if not header:
            raise SchemaError(f"{path}: empty file")
        if target is not None and target not in header:
            raise SchemaError(f"{path}: target column {target!r} not found")
        cols = [j for j, h in enumerate(header) if h != target]
        if len(cols) != model.d_features:
            raise SchemaError(f"{path}: model expects {model.d_features} features, "
                              f"found {len(cols)}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(row[j]) for j in cols])
            except (ValueError, IndexError):
                raise ParseError(f"{path}: unparseable feature at row {line_no}", row=line_no) from None
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(cols))


def cmd_predict(args):
    with _Stage("load-model"):
        model = model_mod.OrdinalModel.load(args.model)
    with _Stage("load"):
        X = _feature_matrix(args.data, model, args.target)
    with _Stage("predict"):
        dist = model_mod.predict_distribution(model, model.standardize(X))
        dist = np.atleast_2d(dist)
        pred = np.argmax(dist, axis=1)
    with _Stage("write"):
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "predicted_rank", "predicted_label"]
                       + [f"p_{k}" for k in range(model.k_states)])
            for i, (r, p) in enumerate(zip(pred, dist)):
                w.writerow([i, int(r), model.label_of(r)] + [_fmt(v) for v in p])
    print(f"wrote {len(pred)} predictions to {args.out}")


def cmd_project(args):
    with _Stage("load"):
        ds = data.load_csv(args.data, args.target, _parse_order(args.order))
    if args.model:
        with _Stage("load-model"):
            model = model_mod.OrdinalModel.load(args.model)
            if model.d_features != ds.features.shape[1]:
                raise SchemaError(f"model expects {model.d_features} features, "
                                  f"found {ds.features.shape[1]}")
    else:
        with _Stage("config"):
            config = _load_config(args)
        with _Stage("train"):
            model, _ = training.fit(ds, config)
    want_svg = args.svg if args.svg is not None else model.h_hidden == 2
    if want_svg and model.h_hidden != 2:
        raise UsageError(f"SVG scatter needs a hidden size of 2, model has {model.h_hidden}; "
                         "use --no-svg to export the CSV only")
    with _Stage("project"):
        emb = model_mod.project(model, model.standardize(ds.features))
    with _Stage("write"):
        csv_path = args.out + ".csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "rank", "label"] + [f"e{j}" for j in range(model.h_hidden)])
            for i, (r, e) in enumerate(zip(ds.labels, emb)):
                w.writerow([i, int(r), ds.label_dictionary[r]] + [_fmt(v) for v in e])
        written = [csv_path]
        if want_svg:
            svg_path = args.out + ".svg"
            SvgScatter(emb, ds.labels, ds.k_states, labels=ds.label_dictionary,
                       title=f"{args.target}: 2-D initial-state projection").save(svg_path)
            written.append(svg_path)
    print("wrote " + ", ".join(written))


def cmd_gradcheck(args):
    with _Stage("model"):
        if args.model:
            model = model_mod.OrdinalModel.load(args.model)
        else:
            h = args.hidden or max(1, (args.k - 1).bit_length())
            model = training.init_model(args.d, args.k, h, args.seed)
    rng = np.random.default_rng(args.seed)
    worst = None
    with _Stage("gradcheck"):
        for _ in range(args.samples):
            x = rng.standard_normal(model.d_features)
            y = int(rng.integers(0, model.k_states))
            rep = training.gradient_check(model, x, y, tolerance=args.tolerance)
            if worst is None or rep.max_rel_error > worst.max_rel_error:
                worst = rep
    status = "PASS" if worst.passed else "FAIL"
    print(f"{status} max relative error {worst.max_rel_error:.3e} "
          f"(tolerance {worst.tolerance:g}) at {worst.worst_param}{list(worst.worst_index)}")
    return EXIT_OK if worst.passed else EXIT_RUNTIME


def build_parser():
    p = argparse.ArgumentParser(prog="ordinal-bst",
                                description="Ordinal regression as a learned binary search.")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp, target_required=True):
        sp.add_argument("--data", required=True, help="input CSV with a header row")
        sp.add_argument("--target", required=target_required, help="ordinal target column")
        sp.add_argument("--order", help="comma-separated target values, lowest first")

    def train_flags(sp):
        sp.add_argument("--config", help="JSON training config")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--hidden", type=int, help="hidden size (default: tree depth)")

    sp = sub.add_parser("evaluate", help="k-fold cross-validation report")
    data_flags(sp)
    train_flags(sp)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--resamples", type=int, default=1000)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", required=True, help="JSON report path")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("train", help="fit a model on a CSV")
    data_flags(sp)
    train_flags(sp)
    sp.add_argument("--out", required=True, help="model JSON path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict with a saved model")
    sp.add_argument("--model", required=True)
    data_flags(sp, target_required=False)
    sp.add_argument("--out", required=True, help="predictions CSV path")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("project", help="export the initial-state embedding")
    data_flags(sp)
    train_flags(sp)
    sp.add_argument("--model", help="saved model; trained from --data when omitted")
    sp.add_argument("--svg", dest="svg", action="store_true", default=None,
                    help="also write an SVG scatter (needs hidden size 2)")
    sp.add_argument("--no-svg", dest="svg", action="store_false")
    sp.add_argument("--out", required=True, help="output prefix for .csv/.svg")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("synth", help="write a synthetic ordinal dataset")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--d", type=int, default=5)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--target", default="target")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the loss gradient")
    sp.add_argument("--model")
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--tolerance", type=float, default=1e-5)
    sp.set_defaults(func=cmd_gradcheck)
    return p


_USAGE_ERRORS = (UsageError, SchemaError, ConfigError, ParseError, LabelError,
                 FileNotFoundError, IsADirectoryError, json.JSONDecodeError)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except _USAGE_ERRORS as exc:
        stage = getattr(exc, "stage", args.command)
        print(f"ordinal-bst {args.command}: {stage} error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OrdinalError, ValueError, OSError) as exc:
        stage = getattr(exc, "stage", args.command)
        print(f"ordinal-bst {args.command}: {stage} error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
