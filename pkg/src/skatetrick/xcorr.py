"""Cross-correlation template classifier.

Similarity between two windows is the largest value of their
energy-normalised cross-correlation over every lag. Per (class, axis), the
Target is the training window that is on average most similar to the rest of
its class; a sample is classified by the weighted sum of its per-axis
similarities to each class's Targets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import AXES, CLASSES, Axis, Dataset, FloatArray, TrickClass, Window

EPS = 1e-12  # bound slack on |score|; normalised peaks can exceed 1 by rounding
DEFAULT_WEIGHTS: dict[Axis, float] = {Axis.X: 1.0, Axis.Y: 1.0, Axis.Z: 2.0}
TARGETS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class XcorrScore:
    value: float
    lag: int


def _arr(w) -> FloatArray:
    return w.values if isinstance(w, Window) else np.asarray(w, dtype=np.float64)


def xcorr_peak(a, b) -> XcorrScore:
    """Peak of ``c[k] = sum_n a[n] * b[n + k] / sqrt(sum a^2 * sum b^2)``.

    Ties go to the smallest ``|k|`` and then to the negative lag.
    """
    a, b = _arr(a), _arr(b)
    ea, eb = float(a @ a), float(b @ b)
    if ea == 0.0 or eb == 0.0:
        raise ValueError("cross-correlation of a zero-energy window is undefined")
    c = np.correlate(b, a, mode="full") / np.sqrt(ea * eb)
    lags = np.arange(c.size) - (a.size - 1)
    peak = c.max()
    hits = lags[c == peak]
    lag = int(hits[np.lexsort((hits, np.abs(hits)))][0])
    return XcorrScore(float(peak), lag)


@dataclass(frozen=True)
class TargetTemplate:
    label: TrickClass
    axis: Axis
    window: Window
    source_id: int
    mean_score: float


Targets = Mapping[tuple[TrickClass, Axis], TargetTemplate]
SampleWindows = Mapping[int, Mapping[Axis, Window]]


def _score_matrix(ws: Sequence[Window]) -> FloatArray:
    n = len(ws)
    m = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = xcorr_peak(ws[i], ws[j]).value
    return m


def select_targets(dataset: Dataset, windows: SampleWindows,
                   classes: Sequence[TrickClass] = CLASSES) -> dict[tuple[TrickClass, Axis], TargetTemplate]:
    """Pick, per (class, axis), the window with the highest mean peak against its classmates.

    The peak is symmetric, so each unordered pair is evaluated once. Ties
    resolve to the lowest sample id.
    """
    targets = {}
    for label in classes:
        ids = sorted(s.id for s in dataset.of_class(label))
        if len(ids) < 2:
            raise ValueError(f"class {label.name} needs at least 2 samples to select a Target")
        for axis in AXES:
            ws = [windows[i][axis] for i in ids]
            m = _score_matrix(ws)
            means = (m.sum(axis=1) - np.diag(m)) / (len(ids) - 1)
            best = int(np.argmax(means))  # first maximum = lowest id
            targets[(label, axis)] = TargetTemplate(label, axis, ws[best], ids[best], float(means[best]))
    return targets


def correlation_table(dataset: Dataset, windows: SampleWindows, targets: Targets, axis: Axis | str,
                      classes: Sequence[TrickClass] = CLASSES) -> FloatArray:
    """Mean peak between the Target of row class and every window of column class."""
    axis = Axis(axis)
    table = np.zeros((len(classes), len(classes)))
    for i, ci in enumerate(classes):
        tw = targets[(ci, axis)].window
        for j, cj in enumerate(classes):
            ids = [s.id for s in dataset.of_class(cj)]
            table[i, j] = np.mean([xcorr_peak(tw, windows[k][axis]).value for k in ids])
    return table


def xcorr_classify(sample_windows: Mapping[Axis, Window], targets: Targets,
                   weights: Mapping[Axis, float] = DEFAULT_WEIGHTS,
                   classes: Sequence[TrickClass] = CLASSES) -> tuple[TrickClass, dict[TrickClass, dict[Axis, float]]]:
    """Return the best-scoring class and the per-class, per-axis peak table."""
    for axis in AXES:
        if axis not in sample_windows:
            raise KeyError(f"missing {axis.value} window")
    table: dict[TrickClass, dict[Axis, float]] = {}
    totals = []
    for label in classes:
        row = {axis: xcorr_peak(sample_windows[axis], targets[(label, axis)].window).value for axis in AXES}
        table[label] = row
        totals.append(sum(weights.get(axis, 0.0) * row[axis] for axis in AXES))
    # classes are in index order, so argmax's first hit is the lowest index
    return classes[int(np.argmax(totals))], table


# persistence

def targets_to_json(targets: Targets) -> str:
    items = []
    for (label, axis), t in sorted(targets.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        items.append({
            "class": label.name,
            "axis": axis.value,
            "values": [float(v) for v in t.window.values],
            "provenance": {"sample_id": t.source_id, "mean_score": t.mean_score},
        })
    return json.dumps({"schema_version": TARGETS_SCHEMA_VERSION, "targets": items}, indent=1) + "\n"


def targets_from_json(text: str) -> dict[tuple[TrickClass, Axis], TargetTemplate]:
    doc = json.loads(text)
    if doc.get("schema_version") != TARGETS_SCHEMA_VERSION:
        raise ValueError("unsupported targets schema_version")
    out = {}
    for it in doc["targets"]:
        label, axis = TrickClass[it["class"]], Axis(it["axis"])
        prov = it["provenance"]
        out[(label, axis)] = TargetTemplate(label, axis, Window(it["values"], axis), int(prov["sample_id"]), float(prov["mean_score"]))
    return out


def save_targets(targets: Targets, path: str | Path) -> None:
    Path(path).write_text(targets_to_json(targets), encoding="utf-8")


def load_targets(path: str | Path) -> dict[tuple[TrickClass, Axis], TargetTemplate]:
    return targets_from_json(Path(path).read_text(encoding="utf-8"))
