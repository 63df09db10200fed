"""Confusion matrices, runtime benchmarks and training-curve export."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .core import CLASSES, TrickClass
from .mlp import TrainReport

BENCH_SCHEMA_VERSION = 1
MIN_REPETITIONS = 5


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class (canonical order)."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        """Percentage of samples on the diagonal."""
        return 100.0 * self.correct / self.total if self.total else float("nan")

    @property
    def error(self) -> float:
        return 100.0 * (self.total - self.correct) / self.total if self.total else float("nan")

    def percentages(self) -> np.ndarray:
        """Each cell as a percentage of all evaluated samples."""
        return 100.0 * self.counts / self.total if self.total else np.zeros_like(self.counts, dtype=float)

    def to_csv(self, percent: bool = False) -> str:
        data = self.percentages() if percent else self.counts
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred"] + [f"{c.value}:{c.name}" for c in CLASSES])
        for c, row in zip(CLASSES, data):
            w.writerow([f"{c.value}:{c.name}"] + [f"{v:.4f}" if percent else int(v) for v in row])
        w.writerow(["accuracy_pct", f"{self.accuracy:.4f}"])
        w.writerow(["error_pct", f"{self.error:.4f}"])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": [c.name for c in CLASSES],
            "counts": self.counts.astype(int).tolist(),
            "total": self.total,
            "accuracy_pct": round(self.accuracy, 6),
            "error_pct": round(self.error, 6),
        }


def confusion(truth: Sequence[TrickClass], pred: Sequence[TrickClass]) -> ConfusionMatrix:
    if len(truth) != len(pred):
        raise ValueError(f"length mismatch: {len(truth)} truths vs {len(pred)} predictions")
    if len(truth) == 0:
        raise ValueError("nothing to evaluate")
    counts = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
    np.add.at(counts, ([TrickClass(t).idx for t in truth], [TrickClass(p).idx for p in pred]), 1)
    return ConfusionMatrix(counts)


# benchmarking

@dataclass(frozen=True)
class BenchmarkReport:
    classifier: str
    n_inputs: int
    repetitions: int
    min_s: float
    max_s: float
    median_s: float
    clock_resolution_s: float
    threads: int = 1

    def to_json(self) -> str:
        return json.dumps({"schema_version": BENCH_SCHEMA_VERSION, **asdict(self)}, indent=2) + "\n"


class BenchmarkError(RuntimeError):
    pass


def benchmark(classifier: Callable[[Any], Any], inputs: Any, repetitions: int = 30,
              name: str = "classifier", n_inputs: int | None = None) -> BenchmarkReport:
    """Time ``classifier(inputs)`` ``repetitions`` times after one untimed warm-up.

    ``inputs`` must already be in memory; only the call itself is timed.
    BLAS/OpenMP pools are limited to one thread for the whole run.
    """
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"need at least {MIN_REPETITIONS} repetitions")
    clock = time.perf_counter
    times = []
    with threadpool_limits(limits=1):
        try:
            classifier(inputs)
            for _ in range(repetitions):
                t0 = clock()
                classifier(inputs)
                times.append(clock() - t0)
        except Exception as exc:
            raise BenchmarkError(f"{name} failed after {len(times)} timed runs: {exc!r}") from exc
    if n_inputs is None:
        n_inputs = len(inputs) if hasattr(inputs, "__len__") else 1
    return BenchmarkReport(
        name, int(n_inputs), repetitions, min(times), max(times), statistics.median(times),
        time.get_clock_info("perf_counter").resolution,
    )


# training curves

def training_curves_csv(report: TrainReport) -> str:
    """``epoch,train_ce,val_ce`` rows followed by a ``best,<epoch>,<val_ce>`` marker row."""
    if not report.train_ce:
        raise ValueError("empty training report")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_ce", "val_ce"])
    for k, (tr, va) in enumerate(zip(report.train_ce, report.val_ce)):
        w.writerow([k, repr(float(tr)), repr(float(va))])
    w.writerow(["best", report.best_epoch, repr(float(report.best_val_ce))])
    return buf.getvalue()


def export_training_curves(report: TrainReport, path: str | Path) -> None:
    Path(path).write_text(training_curves_csv(report), encoding="utf-8")


def read_training_curves(path_or_text: str | Path) -> TrainReport:
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(path_or_text).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    out = TrainReport()
    for row in rows[1:]:
        if row[0] == "best":
            out.best_epoch, out.best_val_ce = int(row[1]), float(row[2])
        else:
            out.train_ce.append(float(row[1]))
            out.val_ce.append(float(row[2]))
    return out
