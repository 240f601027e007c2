"""Command-line interface: split, augment, ensemble, evaluate, train-toy.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
failure. Every output file is written atomically (temp file + rename) and
never overwrites an existing file unless ``--force`` is given. Output text
uses only the inputs and the ``--seed`` flags, never the wall clock, so
reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

from . import __version__
from .augment import (
    apply_pipeline,
    encode_image,
    load_image,
    parse_augment_spec_file,
    pipeline_rng,
    serialize_augment_spec,
)
from .dataset import (
    load_manifest,
    parse_split_csv,
    split_indices,
    split_summary,
    split_to_csv,
    stratified_split,
)
from .ensemble import (
    EnsembleConfig,
    parse_predictions_csv,
    predictions_to_csv,
    result_scores_matrix,
    run_ensemble,
)
from .errors import DataError, NumericError
from .metrics import (
    build_confusion,
    confusion_to_csv,
    report_from_confusion,
    report_to_csv,
    report_to_text,
)
from .predict_io import (
    assemble_bundle,
    labels_to_csv,
    parse_labels_file,
    parse_probability_file,
    serialize_probability_matrix,
)
from .rng import derive_seed
from .toy import parse_feature_file, subset, two_arcs, features_to_csv
from .trainer import (
    Adam,
    NetworkSpec,
    RMSProp,
    SGDMomentum,
    TrainingConfig,
    evaluate,
    export_predictions,
    fit,
    history_to_csv,
    save_params,
)

STRATEGY_ALIASES = {
    "sop": "sum_of_probabilities",
    "sum": "sum_of_probabilities",
    "sum_of_probabilities": "sum_of_probabilities",
    "weighted": "weighted_sum",
    "weighted_sum": "weighted_sum",
    "majority": "majority_vote",
    "majority_vote": "majority_vote",
}


class UsageError(Exception):
    """Bad flag combination detected after argparse."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_file(path: Path, data, force: bool) -> None:
    """Atomic write (temp + rename); refuses to overwrite without force."""
    path = Path(path)
    if path.exists() and not force:
        raise DataError(f"{path} already exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _write_params_file(path: Path, params, force: bool) -> None:
    path = Path(path)
    if path.exists() and not force:
        raise DataError(f"{path} already exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp.npz")
    try:
        save_params(params, tmp)
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise


def _check_split_fractions(train: float, val: float) -> None:
    try:
        tf, vf = Fraction(str(train)), Fraction(str(val))
    except ValueError:
        raise UsageError(f"fractions must be decimal numbers, got {train}/{val}") from None
    if tf <= 0:
        raise UsageError(f"--train must be > 0, got {train}")
    if vf < 0:
        raise UsageError(f"--val must be >= 0, got {val}")
    if tf + vf > 1:
        raise UsageError(f"--train {train} + --val {val} exceeds 1")


def _format_table(rows: list[dict], columns: list[str]) -> str:
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in columns}
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    for r in rows:
        lines.append("  ".join(str(r[c]).rjust(widths[c]) if isinstance(r[c], int)
                               else str(r[c]).ljust(widths[c]) for c in columns))
    return "\n".join(lines) + "\n"


def cmd_split(args) -> int:
    _check_split_fractions(args.train, args.val)
    manifest = load_manifest(args.manifest, seed=args.seed)
    split = stratified_split(manifest, args.train, args.val)
    out = Path(args.out)
    _write_file(out / "split.csv", split_to_csv(manifest, split), args.force)

    rows = split_summary(manifest, split)
    columns = ["class", "images", "train", "validation", "test"]
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(str(r[c]) for c in columns) + "\n")
    _write_file(out / "summary.csv", buf.getvalue(), args.force)

    sys.stdout.write(_format_table(rows, columns))
    sys.stdout.write(f"wrote {out / 'split.csv'} and {out / 'summary.csv'}\n")
    return 0


def cmd_augment(args) -> int:
    rows = parse_split_csv(args.split_file)
    spec = parse_augment_spec_file(args.spec)
    selected = rows if args.split == "all" else [r for r in rows if r[2] == args.split]
    if not selected:
        raise DataError(f"no records in split {args.split!r}")
    out = Path(args.out)
    root = Path(args.root)

    class_order: list[str] = []
    for _, label, _ in rows:
        if label not in class_order:
            class_order.append(label)

    log_lines = ["input_path,label,output_path,stream_seed"]
    manifest_lines = [f"# classes={','.join(class_order)}", "path,label"]
    used: set[Path] = set()
    for index, (rec_path, label, _) in enumerate(selected):
        src = root / rec_path
        if spec.steps:
            rel = Path(label) / (Path(rec_path).stem + ".png")
            rng = pipeline_rng(spec, index)
            img = apply_pipeline(load_image(src), spec, rng)
            payload = encode_image(img, "png")
        else:
            # An empty pipeline is the identity: copy the bytes verbatim.
            rel = Path(label) / Path(rec_path).name
            try:
                payload = src.read_bytes()
            except FileNotFoundError:
                raise DataError(f"{src}: no such file") from None
        dest = out / rel
        if dest in used:
            raise DataError(f"output collision: two inputs map to {dest}")
        used.add(dest)
        _write_file(dest, payload, args.force)
        log_lines.append(f"{rec_path},{label},{rel.as_posix()},{derive_seed(spec.seed, index)}")
        manifest_lines.append(f"{rel.as_posix()},{label}")

    _write_file(out / "augment_log.csv", "\n".join(log_lines) + "\n", args.force)
    _write_file(out / "manifest.csv", "\n".join(manifest_lines) + "\n", args.force)
    _write_file(out / "spec.txt", serialize_augment_spec(spec), args.force)
    sys.stdout.write(f"augmented {len(selected)} images into {out}\n")
    return 0


def cmd_ensemble(args) -> int:
    strategy = STRATEGY_ALIASES[args.strategy]
    weights = None
    if args.weights is not None:
        try:
            weights = tuple(float(w) for w in args.weights.split(","))
        except ValueError:
            raise UsageError(f"--weights must be comma-separated numbers, got {args.weights!r}") from None
        if strategy != "weighted_sum":
            raise UsageError("--weights only applies to the weighted strategy")
    if strategy == "weighted_sum" and weights is None:
        raise UsageError("the weighted strategy requires --weights")

    matrices = [parse_probability_file(p, renormalize=args.renormalize) for p in args.probs]
    bundle = assemble_bundle(matrices)
    result = run_ensemble(bundle, EnsembleConfig(strategy, weights))

    out = Path(args.out)
    _write_file(out / "predictions.csv", predictions_to_csv(result), args.force)
    scores = result_scores_matrix(result)
    _write_file(out / "scores.csv", serialize_probability_matrix(scores), args.force)
    if args.svg:
        from .figures import scores_heatmap_svg

        _write_file(out / "scores.svg",
                    scores_heatmap_svg(scores.class_names, scores.sample_ids, scores.rows),
                    args.force)

    counts = {name: 0 for name in result.class_names}
    for label in result.predicted_labels:
        counts[label] += 1
    summary = ", ".join(f"{name}: {n}" for name, n in counts.items())
    sys.stdout.write(
        f"{strategy} over {bundle.num_models} models, "
        f"{len(result.sample_ids)} samples -> {summary}\n"
    )
    if int(result.ties.sum()):
        sys.stdout.write(f"ties broken toward the lower class index: {int(result.ties.sum())}\n")
    return 0


def cmd_evaluate(args) -> int:
    predictions = parse_predictions_csv(args.predictions)
    truth_ids, truth_labels, class_names = parse_labels_file(args.truth)

    predicted_by_id = {sid: label for sid, label, _ in predictions}
    missing = [sid for sid in truth_ids if sid not in predicted_by_id]
    extra = [sid for sid in predicted_by_id if sid not in set(truth_ids)]
    if missing or extra:
        raise DataError(
            f"sample ids do not align: {len(missing)} missing from predictions "
            f"(first: {missing[:3]}), {len(extra)} unknown to truth (first: {extra[:3]})"
        )
    index = {name: i for i, name in enumerate(class_names)}
    actual, predicted = [], []
    for sid, truth_label in zip(truth_ids, truth_labels):
        predicted_label = predicted_by_id[sid]
        if predicted_label not in index:
            raise DataError(
                f"predicted label {predicted_label!r} for {sid!r} is not a truth class"
            )
        actual.append(index[truth_label])
        predicted.append(index[predicted_label])

    cm = build_confusion(actual, predicted, class_names)
    report = report_from_confusion(cm)

    out = Path(args.out)
    _write_file(out / "metrics.csv", report_to_csv(report), args.force)
    text = report_to_text(report)
    _write_file(out / "metrics.txt", text, args.force)
    _write_file(out / "confusion.csv", confusion_to_csv(cm), args.force)
    if args.svg:
        from .figures import confusion_matrix_svg

        _write_file(out / "confusion_matrix.svg", confusion_matrix_svg(cm), args.force)
    sys.stdout.write(text)
    return 0


def cmd_toy_data(args) -> int:
    fs = two_arcs(per_class=args.per_class, noise=args.noise, seed=args.seed)
    _write_file(Path(args.out), features_to_csv(fs), args.force)
    sys.stdout.write(
        f"wrote {fs.num_samples} samples ({', '.join(fs.class_names)}) to {args.out}\n"
    )
    return 0


def _optimizer_from_flag(name: str):
    if name == "adam":
        return Adam()
    if name == "sgd":
        return SGDMomentum()
    return RMSProp()


def cmd_train_toy(args) -> int:
    _check_split_fractions(args.train_frac, args.val_frac)
    fs = parse_feature_file(args.features)
    split = split_indices(list(fs.labels), len(fs.class_names), args.split_seed,
                          args.train_frac, args.val_frac, fs.class_names)
    train_fs = subset(fs, split.train)
    val_fs = subset(fs, split.validation)
    test_fs = subset(fs, split.test)
    if not test_fs.sample_ids:
        raise DataError("the split left no test samples; lower --train-frac/--val-frac")

    spec = NetworkSpec(
        input_dim=fs.num_features,
        hidden=args.hidden,
        classes=len(fs.class_names),
        dropout_rate=args.dropout,
    )
    config = TrainingConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        optimizer=_optimizer_from_flag(args.optimizer),
        patience=args.patience,
        seed=args.seed,
    )
    result = fit(spec, config, train_fs.features, train_fs.labels,
                 val_fs.features, val_fs.labels)

    name = args.name or f"toy_seed{args.seed}"
    out = Path(args.out)
    _write_params_file(out / f"{name}_params.npz", result.params, args.force)
    _write_file(out / f"{name}_history.csv", history_to_csv(result.history), args.force)

    for tag, part in (("val", val_fs), ("test", test_fs)):
        matrix = export_predictions(spec, result.params, part.features, name,
                                    sample_ids=part.sample_ids,
                                    class_names=fs.class_names)
        _write_file(out / f"{name}_{tag}_probs.csv",
                    serialize_probability_matrix(matrix), args.force)
        _write_file(out / f"{name}_{tag}_truth.csv",
                    labels_to_csv(part.sample_ids, part.label_names(), fs.class_names),
                    args.force)
    if args.svg:
        from .figures import training_curves_svg

        _write_file(out / f"{name}_curves.svg",
                    training_curves_svg(result.history), args.force)

    val_loss, val_acc = evaluate(spec, result.params, val_fs.features, val_fs.labels)
    test_loss, test_acc = evaluate(spec, result.params, test_fs.features, test_fs.labels)
    sys.stdout.write(
        f"{name}: {result.epochs_run} epochs"
        f"{' (early stop)' if result.stopped_early else ''}, "
        f"best epoch {result.best_epoch} (val loss {result.best_val_loss:.6f})\n"
        f"validation acc {val_acc:.4f} loss {val_loss:.6f} | "
        f"test acc {test_acc:.4f} loss {test_loss:.6f}\n"
    )
    return 0


def _hidden_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden sizes {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError(f"hidden sizes must be >= 1, got {text!r}")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smearkit",
                     description="Stratified splits, image augmentation, "
                                 "probability ensembling, and evaluation reports.")
    parser.add_argument("--version", action="version", version=f"smearkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/validation/test split")
    p.add_argument("manifest", help="manifest CSV or class-per-directory tree")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train", type=float, default=0.7, help="train fraction (default 0.7)")
    p.add_argument("--val", type=float, default=0.2, help="validation fraction (default 0.2)")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed (default 0)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="apply an augmentation pipeline to a split")
    p.add_argument("split_file", help="split CSV from the split subcommand")
    p.add_argument("--spec", required=True, help="augmentation spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", default="train",
                   choices=["train", "validation", "test", "all"],
                   help="which split to augment (default train)")
    p.add_argument("--root", default=".", help="base directory for image paths")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("ensemble", help="combine per-model probability files")
    p.add_argument("probs", nargs="+", help="probability CSV files, one per model")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strategy", default="sop", choices=sorted(STRATEGY_ALIASES),
                   help="aggregation strategy (default sop)")
    p.add_argument("--weights", help="comma-separated per-model weights (weighted only)")
    p.add_argument("--renormalize", action="store_true",
                   help="rescale rows whose sums are within 1e-3 of 1")
    p.add_argument("--svg", action="store_true", help="also render a scores heatmap")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("predictions", help="predictions CSV (sample_id,predicted_label,tie_flag)")
    p.add_argument("truth", help="truth CSV (sample_id,label)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", action="store_true", help="also render a confusion heatmap")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("toy-data", help="write the bundled two-arcs feature file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--per-class", type=int, default=2000, help="samples per class (default 2000)")
    p.add_argument("--noise", type=float, default=0.12, help="jitter stddev (default 0.12)")
    p.add_argument("--seed", type=int, default=7, help="generator seed (default 7)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_toy_data)

    p = sub.add_parser("train-toy", help="train the dense classifier on a feature file")
    p.add_argument("features", help="feature CSV (sample_id,<features...>,label)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", help="artifact name prefix (default toy_seed<seed>)")
    p.add_argument("--seed", type=int, default=0, help="training seed (default 0)")
    p.add_argument("--split-seed", type=int, default=0,
                   help="stratified-split seed, shared across runs so exports align (default 0)")
    p.add_argument("--train-frac", type=float, default=0.7, help="train fraction (default 0.7)")
    p.add_argument("--val-frac", type=float, default=0.2, help="validation fraction (default 0.2)")
    p.add_argument("--hidden", type=_hidden_sizes, default=(64,),
                   help="comma-separated hidden layer sizes (default 64)")
    p.add_argument("--epochs", type=int, default=60, help="max epochs (default 60)")
    p.add_argument("--batch", type=int, default=16, help="batch size (default 16)")
    p.add_argument("--lr", type=float, default=1e-4, help="learning rate (default 1e-4)")
    p.add_argument("--dropout", type=float, default=0.1, help="dropout rate (default 0.1)")
    p.add_argument("--patience", type=int, default=10, help="early-stop patience (default 10)")
    p.add_argument("--optimizer", default="adam", choices=["adam", "sgd", "rmsprop"],
                   help="optimizer (default adam)")
    p.add_argument("--svg", action="store_true", help="also render training curves")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=cmd_train_toy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
