"""End-to-end reproduction run: generate, segment, train, classify, evaluate."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .core import AXES, CLASSES, Axis, Dataset, TrickClass, Window
from .evaluation import ConfusionMatrix, confusion
from .mlp import MlpModel, TrainConfig, TrainReport, classify_batch, forward, fuse_axes, init_model, split_indices, train_scg
from .segmenter import DetectorConfig, WindowRecord, segment_dataset
from .synthgen import DEFAULT_COUNTS, generate_dataset, load_library
from .xcorr import DEFAULT_WEIGHTS, TargetTemplate, correlation_table, select_targets, xcorr_classify

REPORT_SCHEMA_VERSION = 1
MODEL_NAMES = ("X", "Y", "Z", "XYZ")

# published headline figures from recorded board signals, kept for side-by-side comparison
PUBLISHED_REFERENCE = {
    "accuracy_pct": {"X": 94.8, "Y": 96.7, "Z": 98.7, "XYZ": 92.8},
    "xyz_per_axis_accuracy_pct": {"X": 88.2, "Y": 89.5, "Z": 96.1},
    "best_val_ce": {"Z": 0.019549, "XYZ": 0.078475},
    "best_epoch": {"Z": 23, "XYZ": 42},
    "fusion_error_pct": 0.04,
}


def derive_seed(seed: int, *key: int) -> int:
    """Independent child seed for a pipeline stage."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def model_axes(name: str) -> tuple[Axis, ...]:
    return AXES if name == "XYZ" else (Axis(name),)


def windows_by_sample(records: Sequence[WindowRecord]) -> tuple[dict[int, dict[Axis, Window]], dict[int, TrickClass]]:
    """First interest window per (sample, axis), plus each sample's label."""
    wins: dict[int, dict[Axis, Window]] = {}
    labels: dict[int, TrickClass] = {}
    for r in records:
        if r.event_index != 0:
            continue
        wins.setdefault(r.sample_id, {})[r.axis] = r.window
        labels[r.sample_id] = TrickClass[r.label]
    return wins, labels


def stack(wins, labels, ids, axes) -> tuple[np.ndarray, list[TrickClass]]:
    x = np.array([wins[i][a].values for i in ids for a in axes])
    y = [labels[i] for i in ids for _ in axes]
    return x, y


def split_ids(labels: Mapping[int, TrickClass], val_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    ids = sorted(labels)
    tr, va = split_indices([labels[i] for i in ids], val_fraction, seed)
    return [ids[k] for k in tr], [ids[k] for k in va]


def train_named_model(name: str, wins, labels, train_ids, val_ids, cfg: TrainConfig) -> tuple[MlpModel, TrainReport]:
    axes = model_axes(name)
    xt, yt = stack(wins, labels, train_ids, axes)
    xv, yv = stack(wins, labels, val_ids, axes)
    model = init_model(seed=cfg.seed, trained_axis=name)
    return train_scg(model, xt, yt, xv, yv, cfg)


class StageError(RuntimeError):
    """A pipeline stage failed; the original exception is the ``__cause__``."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class PipelineResult:
    seed: int
    dataset: Dataset
    records: list[WindowRecord]
    train_ids: list[int]
    val_ids: list[int]
    models: dict[str, MlpModel] = field(default_factory=dict)
    reports: dict[str, TrainReport] = field(default_factory=dict)
    confusions: dict[str, ConfusionMatrix] = field(default_factory=dict)
    targets: dict[tuple[TrickClass, Axis], TargetTemplate] = field(default_factory=dict)
    z_table: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    def accuracy(self, name: str) -> float:
        return self.confusions[name].accuracy


def _r(x: float) -> float:
    return round(float(x), 6)


def run_pipeline(seed: int, library=None, counts: Mapping[TrickClass, int] = DEFAULT_COUNTS,
                 train_cfg: TrainConfig = TrainConfig(), detector: DetectorConfig = DetectorConfig(),
                 weights: Mapping[Axis, float] = DEFAULT_WEIGHTS, workers: int = 1) -> PipelineResult:
    """Run every stage for one master seed.

    The dataset uses ``seed`` directly; the split and each network's
    initialisation use seeds derived from it. Validation samples are held
    out from every model, so fusion and the correlation classifier are
    scored on the same unseen tricks as the networks.
    """
    with _stage("generate"):
        library = load_library() if library is None else library
        dataset = generate_dataset(library, counts, seed)
    with _stage("segment"):
        records = segment_dataset(dataset, detector)
        wins, labels = windows_by_sample(records)
    with _stage("split"):
        train_ids, val_ids = split_ids(labels, train_cfg.val_fraction, derive_seed(seed, 0))
    res = PipelineResult(seed, dataset, records, train_ids, val_ids)

    cfgs = {name: replace(train_cfg, seed=derive_seed(seed, 1, k)) for k, name in enumerate(MODEL_NAMES)}

    def fit(name):
        return name, train_named_model(name, wins, labels, train_ids, val_ids, cfgs[name])

    with _stage("train"):
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                fitted = list(pool.map(fit, MODEL_NAMES))
        else:
            fitted = [fit(n) for n in MODEL_NAMES]
    for name, (model, rep) in fitted:
        res.models[name], res.reports[name] = model, rep

    with _stage("evaluate"):
        truth = [labels[i] for i in val_ids]
        probs = {}
        for name in MODEL_NAMES:
            xv, yv = stack(wins, labels, val_ids, model_axes(name))
            res.confusions[name] = confusion(yv, classify_batch(res.models[name], xv))
            if name != "XYZ":
                probs[name] = forward(res.models[name], xv)
        for axis in AXES:
            xv, yv = stack(wins, labels, val_ids, (axis,))
            res.confusions[f"XYZ@{axis.value}"] = confusion(yv, classify_batch(res.models["XYZ"], xv))
        fused = [fuse_axes(probs["X"][k], probs["Y"][k], probs["Z"][k]) for k in range(len(val_ids))]
        res.confusions["fusion"] = confusion(truth, fused)

    with _stage("xcorr"):
        res.targets = select_targets(dataset.subset(train_ids), wins)
        xc = [xcorr_classify(wins[i], res.targets, weights)[0] for i in val_ids]
        res.confusions["xcorr"] = confusion(truth, xc)
        res.z_table = correlation_table(dataset, wins, select_targets(dataset, wins), Axis.Z)

    res.report = build_report(res, counts)
    return res


def build_report(res: PipelineResult, counts) -> dict:
    models = {}
    for name in MODEL_NAMES:
        rep = res.reports[name]
        models[f"ANN_{name}"] = {
            "val_accuracy_pct": _r(res.confusions[name].accuracy),
            "val_error_pct": _r(res.confusions[name].error),
            "best_val_ce": _r(rep.best_val_ce),
            "best_epoch": rep.best_epoch,
            "epochs_run": rep.epochs,
            "stop_reason": rep.stop_reason,
            "confusion": res.confusions[name].to_dict()["counts"],
        }
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "seed": res.seed,
        "counts": {c.name: int(counts.get(c, 0)) for c in CLASSES},
        "n_signals": res.dataset.n_signals,
        "n_windows": len(res.records),
        "split": {"train": len(res.train_ids), "val": len(res.val_ids)},
        "models": models,
        "xyz_per_axis_accuracy_pct": {a.value: _r(res.confusions[f"XYZ@{a.value}"].accuracy) for a in AXES},
        "fusion": {"val_accuracy_pct": _r(res.confusions["fusion"].accuracy),
                   "val_error_pct": _r(res.confusions["fusion"].error),
                   "confusion": res.confusions["fusion"].to_dict()["counts"]},
        "xcorr": {"val_accuracy_pct": _r(res.confusions["xcorr"].accuracy),
                  "val_error_pct": _r(res.confusions["xcorr"].error),
                  "confusion": res.confusions["xcorr"].to_dict()["counts"]},
        "z_correlation_table": [[_r(v) for v in row] for row in res.z_table],
        "published_reference": PUBLISHED_REFERENCE,
    }


def report_json(report: dict) -> str:
    text = json.dumps(report, indent=2, sort_keys=True)
    # keep innermost numeric rows on one line
    text = re.sub(r"\[\s+([-0-9.,\s]+?)\s+\]", lambda m: "[" + re.sub(r"\s+", " ", m.group(1)) + "]", text)
    return text + "\n"
