"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 numeric failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import AXES, CLASSES, Axis, TrickClass, read_dataset, write_dataset
from .evaluation import BenchmarkError, benchmark, confusion, export_training_curves
from .mlp import (MODEL_SCHEMA_VERSION, NumericError, TrainConfig, forward, fuse_axes, init_model, load_model,
                  save_model, train_scg)
from .pipeline import (MODEL_NAMES, StageError, derive_seed, model_axes, report_json, run_pipeline, split_ids,
                       stack, train_named_model, windows_by_sample)
from .segmenter import read_windows, segment_dataset, write_windows
from .synthgen import LIBRARY_SCHEMA_VERSION, DEFAULT_COUNTS, generate_dataset, load_library
from .xcorr import (DEFAULT_WEIGHTS, TARGETS_SCHEMA_VERSION, correlation_table, load_targets, save_targets,
                    select_targets, xcorr_classify)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
SCHEMAS = {"signature_library": LIBRARY_SCHEMA_VERSION, "model": MODEL_SCHEMA_VERSION,
           "targets": TARGETS_SCHEMA_VERSION}


class ConfigError(ValueError):
    pass


def parse_counts(text: str) -> dict[TrickClass, int]:
    counts = {c: 0 for c in CLASSES}
    for part in filter(None, text.split(",")):
        try:
            name, value = part.split("=")
            counts[TrickClass[name.strip().upper()]] = int(value)
        except (ValueError, KeyError):
            raise ConfigError(f"bad --counts entry {part!r}; expected NAME=INT") from None
    return counts


def parse_weights(text: str) -> dict[Axis, float]:
    weights = dict(DEFAULT_WEIGHTS)
    for part in filter(None, text.split(",")):
        try:
            name, value = part.split("=")
            weights[Axis(name.strip().upper())] = float(value)
        except ValueError:
            raise ConfigError(f"bad --weights entry {part!r}; expected AXIS=FLOAT") from None
    return weights


def write_run_manifest(out: Path, args: argparse.Namespace, inputs: list, outputs: list) -> None:
    """Record the invocation next to its output (``<dir>/run_manifest.json`` or ``<file>.manifest.json``)."""
    path = out / "run_manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    doc = {
        "command": args.command + (f" {args.xcorr_command}" if getattr(args, "xcorr_command", None) else ""),
        "argv": sys.argv[1:],
        "seed": args.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "schema_versions": SCHEMAS,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _require(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} is required")
    return Path(path)


# commands

def cmd_generate(args) -> int:
    try:
        library = load_library(args.config)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"signature library: {exc}") from exc
    counts = parse_counts(args.counts) if args.counts else DEFAULT_COUNTS
    out = _require(args.out, "--out")
    out.mkdir(parents=True, exist_ok=True)
    ds = generate_dataset(library, counts, args.seed)
    write_dataset(ds, out / "dataset.csv", out / "manifest.json")
    write_run_manifest(out, args, [args.config] if args.config else [], [out / "dataset.csv", out / "manifest.json"])
    print(f"{len(ds)} samples, {ds.n_signals} signals -> {out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    src, out = _require(args.input, "--in"), _require(args.out, "--out")
    ds = read_dataset(src)
    records = segment_dataset(ds)
    write_windows(records, out)
    write_run_manifest(out, args, [src], [out])
    print(f"{len(records)} windows from {ds.n_signals} signals -> {out}")
    return EXIT_OK


def _load_windows(args):
    src = _require(args.windows, "--windows")
    return src, windows_by_sample(read_windows(src))


def cmd_xcorr(args) -> int:
    src, (wins, labels) = _load_windows(args)
    ds = _label_dataset(labels)
    classes = CLASSES if args.classes == 5 else tuple(c for c in CLASSES if c != TrickClass.NOLLIE)
    out = _require(args.out, "--out")
    if args.xcorr_command == "select-targets":
        if args.train_only:
            train_ids, _ = split_ids(labels, 0.2, derive_seed(args.seed, 0))
            ds = ds.subset(train_ids)
        save_targets(select_targets(ds, wins, classes), out)
        inputs = [src]
    else:
        targets = load_targets(_require(args.targets, "--targets"))
        inputs = [src, args.targets]
        if args.xcorr_command == "classify":
            weights = parse_weights(args.weights or "")
            with out.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["sample_id", "label", "pred"] + [f"score_{c.name}" for c in classes])
                for sid in sorted(wins):
                    pred, table = xcorr_classify(wins[sid], targets, weights, classes)
                    scores = [sum(weights.get(a, 0.0) * table[c][a] for a in AXES) for c in classes]
                    w.writerow([sid, labels[sid].name, pred.name] + [f"{s:.6f}" for s in scores])
        else:
            table = correlation_table(ds, wins, targets, args.axis, classes)
            if args.format == "json":
                out.write_text(json.dumps({"axis": args.axis, "labels": [c.name for c in classes],
                                           "table": np.round(table, 6).tolist()}, indent=2) + "\n")
            else:
                with out.open("w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["target\\class"] + [c.name for c in classes])
                    for c, row in zip(classes, table):
                        w.writerow([c.name] + [f"{v:.6f}" for v in row])
    write_run_manifest(out, args, inputs, [out])
    return EXIT_OK


def _label_dataset(labels):
    """Minimal dataset carrying only ids and labels, as the correlation routines need."""
    from .core import Dataset, TrickSample, stance_for

    samples = [TrickSample(sid, lab, stance_for(lab), ()) for sid, lab in sorted(labels.items())]
    return Dataset(samples, manifest={c.name: sum(1 for s in samples if s.label == c) for c in CLASSES})


def cmd_train(args) -> int:
    src, (wins, labels) = _load_windows(args)
    out = _require(args.out, "--out")
    seed = args.seed
    train_ids, val_ids = split_ids(labels, args.val_fraction, derive_seed(seed, 0))
    cfg = TrainConfig(seed=derive_seed(seed, 1, MODEL_NAMES.index(args.axis)), max_epochs=args.max_epochs,
                      val_fraction=args.val_fraction, patience=args.patience)
    model, report = train_named_model(args.axis, wins, labels, train_ids, val_ids, cfg)
    save_model(model, out)
    outputs = [out]
    if args.curves:
        export_training_curves(report, args.curves)
        outputs.append(args.curves)
    write_run_manifest(out, args, [src], outputs)
    print(f"ANN {args.axis}: best val CE {report.best_val_ce:.6f} at epoch {report.best_epoch} ({report.stop_reason})")
    return EXIT_OK


def cmd_classify(args) -> int:
    src, (wins, labels) = _load_windows(args)
    model = load_model(_require(args.model, "--model"))
    out = _require(args.out, "--out")
    axes = model_axes(args.axis or model.trained_axis or "Z")
    ids = sorted(wins)
    x, y = stack(wins, labels, ids, axes)
    probs = forward(model, x)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "axis", "label", "pred"] + [f"p_{c.name}" for c in CLASSES])
        rows = [(sid, a) for sid in ids for a in axes]
        for (sid, a), truth, p in zip(rows, y, probs):
            w.writerow([sid, a.value, truth.name, TrickClass.from_idx(int(np.argmax(p))).name] + [f"{v:.9f}" for v in p])
    write_run_manifest(out, args, [src, args.model], [out])
    return EXIT_OK


def _read_predictions(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_fuse(args) -> int:
    paths = [_require(p, f"--pred-{a}") for p, a in zip((args.pred_x, args.pred_y, args.pred_z), "xyz")]
    preds = [{int(r["sample_id"]): r for r in _read_predictions(p)} for p in paths]
    out = _require(args.out, "--out")
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "label", "pred"])
        for sid in sorted(preds[2]):
            vecs = [[float(p[sid][f"p_{c.name}"]) for c in CLASSES] for p in preds]
            w.writerow([sid, preds[2][sid]["label"], fuse_axes(*vecs).name])
    write_run_manifest(out, args, paths, [out])
    return EXIT_OK


def cmd_eval(args) -> int:
    src = _require(args.pred, "--pred")
    rows = _read_predictions(src)
    if args.only_val:
        labels = {int(r["sample_id"]): TrickClass[r["label"]] for r in rows}
        _, val_ids = split_ids(labels, 0.2, derive_seed(args.seed, 0))
        keep = set(val_ids)
        rows = [r for r in rows if int(r["sample_id"]) in keep]
    cm = confusion([TrickClass[r["label"]] for r in rows], [TrickClass[r["pred"]] for r in rows])
    print(f"accuracy {cm.accuracy:.2f}%  error {cm.error:.2f}%  (n={cm.total})")
    if args.out:
        out = Path(args.out)
        if args.format == "json":
            out.write_text(json.dumps(cm.to_dict(), indent=2) + "\n", encoding="utf-8")
        else:
            out.write_text(cm.to_csv() + "\n" + cm.to_csv(percent=True), encoding="utf-8")
        write_run_manifest(out, args, [src], [out])
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = args.seed
    res = run_pipeline(seed)
    wins, _ = windows_by_sample(res.records)
    ids = sorted(wins)
    if args.classifier == "xcorr":
        if args.signals % 3:
            raise ConfigError("--signals must be a multiple of 3 for xcorr (one window per axis)")
        batch = [wins[i] for i in ids[: args.signals // 3]]

        def run(b):
            return [xcorr_classify(w, res.targets) for w in b]
    elif args.classifier == "ann-train":
        # training cost, timed separately from inference
        labels = {r.sample_id: TrickClass[r.label] for r in res.records}
        xs, ys = stack(wins, labels, ids, AXES)
        # samples are grouped by class, so draw a fixed shuffled subset
        pick = np.random.default_rng(seed).permutation(len(ys))[: args.signals]
        batch = (xs[pick], [ys[k] for k in pick])
        cfg = TrainConfig(seed=derive_seed(seed, 1, 3), max_epochs=args.max_epochs)

        def run(b):
            return train_scg(init_model(seed=cfg.seed), b[0], b[1], cfg=cfg)
    else:
        batch = np.array([wins[i][a].values for i in ids for a in AXES][: args.signals])
        model = res.models["XYZ"]

        def run(b):
            return np.argmax(forward(model, b), axis=1)
    rep = benchmark(run, batch, args.repetitions, f"{args.classifier}", n_inputs=args.signals)
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        write_run_manifest(Path(args.out), args, [], [args.out])
    print(text, end="")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    seed = args.seed
    try:
        library = load_library(args.config)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"signature library: {exc}") from exc
    res = run_pipeline(seed, library, workers=args.workers)
    out = _require(args.out, "--out")
    out.mkdir(parents=True, exist_ok=True)
    outputs = [out / "dataset.csv", out / "manifest.json", out / "windows.csv", out / "targets.json", out / "report.json"]
    write_dataset(res.dataset, outputs[0], outputs[1])
    write_windows(res.records, outputs[2])
    save_targets(res.targets, outputs[3])
    for name in MODEL_NAMES:
        save_model(res.models[name], out / f"model_{name}.json")
        export_training_curves(res.reports[name], out / f"curves_{name}.csv")
        outputs += [out / f"model_{name}.json", out / f"curves_{name}.csv"]
    for name, cm in res.confusions.items():
        p = out / f"confusion_{name.replace('@', '_')}.csv"
        p.write_text(cm.to_csv(), encoding="utf-8")
        outputs.append(p)
    outputs[4].write_text(report_json(res.report), encoding="utf-8")
    write_run_manifest(out, args, [args.config] if args.config else [], outputs)
    m = res.report["models"]
    print("  ".join(f"ANN {n}: {m['ANN_' + n]['val_accuracy_pct']:.1f}%" for n in MODEL_NAMES)
          + f"  fusion: {res.report['fusion']['val_accuracy_pct']:.1f}%  xcorr: {res.report['xcorr']['val_accuracy_pct']:.1f}%")
    print(f"report -> {outputs[4]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--config", default=None, help="signature library JSON (default: bundled)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="skatetrick", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="synthesise a dataset")
    g.add_argument("--counts", help="per-class counts, e.g. NOLLIE=32,NSHOV=42,FLIP=37,SHOV=32,OLLIE=38")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("segment", parents=[common], help="detect events and cut 82-sample windows")
    s.add_argument("--in", dest="input", required=True, help="dataset CSV")
    s.set_defaults(func=cmd_segment)

    x = sub.add_parser("xcorr", help="cross-correlation classifier")
    xs = x.add_subparsers(dest="xcorr_command", required=True)
    for name, hlp in (("select-targets", "pick a Target per class and axis"),
                      ("classify", "classify samples against Targets"),
                      ("table", "mean correlation table for one axis")):
        q = xs.add_parser(name, parents=[common], help=hlp)
        q.add_argument("--windows", required=True)
        q.add_argument("--classes", type=int, choices=(4, 5), default=5, help="4 drops NOLLIE")
        if name == "select-targets":
            q.add_argument("--train-only", action="store_true",
                           help="use only the training split that `pipeline --seed` would use")
        else:
            q.add_argument("--targets", required=True)
        if name == "classify":
            q.add_argument("--weights", help="per-axis weights, e.g. X=1,Y=1,Z=2")
        if name == "table":
            q.add_argument("--axis", choices=("X", "Y", "Z"), default="Z")
        q.set_defaults(func=cmd_xcorr)

    t = sub.add_parser("train", parents=[common], help="train one network with SCG")
    t.add_argument("--axis", choices=MODEL_NAMES, required=True)
    t.add_argument("--windows", required=True)
    t.add_argument("--curves", help="write training curves CSV here")
    t.add_argument("--max-epochs", type=int, default=200)
    t.add_argument("--patience", type=int, default=6)
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", parents=[common], help="classify windows with a trained network")
    c.add_argument("--model", required=True)
    c.add_argument("--windows", required=True)
    c.add_argument("--axis", choices=MODEL_NAMES, help="which windows to feed (default: model's axis)")
    c.set_defaults(func=cmd_classify)

    f = sub.add_parser("fuse", parents=[common], help="majority-vote fusion of X/Y/Z predictions")
    f.add_argument("--pred-x", required=True)
    f.add_argument("--pred-y", required=True)
    f.add_argument("--pred-z", required=True)
    f.set_defaults(func=cmd_fuse)

    e = sub.add_parser("eval", parents=[common], help="confusion matrix of a predictions CSV")
    e.add_argument("--pred", required=True)
    e.add_argument("--only-val", action="store_true", help="restrict to the validation split of --seed")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="single-threaded runtime benchmark")
    b.add_argument("--classifier", choices=("ann", "xcorr", "ann-train"), required=True,
                   help="ann-train times full-batch SCG training (without validation) instead of inference")
    b.add_argument("--signals", type=int, required=True)
    b.add_argument("--repetitions", type=int, default=30)
    b.add_argument("--max-epochs", type=int, default=50, help="SCG iterations per ann-train repetition")
    b.set_defaults(func=cmd_bench)

    pp = sub.add_parser("pipeline", parents=[common], help="full reproduction run")
    pp.add_argument("--workers", type=int, default=1, help="train the four networks in parallel")
    pp.set_defaults(func=cmd_pipeline)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (StageError, BenchmarkError)) and exc.__cause__ is not None:
        return _exit_code(exc.__cause__)
    if isinstance(exc, (NumericError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_USAGE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StageError, BenchmarkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
