"""Two-threshold event detection and fixed-length windowing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import WINDOW_LEN, AccelSignal, Axis, FloatArray, TrickSample, Window


@dataclass(frozen=True)
class DetectorConfig:
    start_threshold: float = 5000.0
    interest_threshold: float = 10000.0
    max_event_span: int = 90
    window_len: int = WINDOW_LEN
    refractory: int = 90
    baseline_len: int = 26

    def __post_init__(self) -> None:
        if not 0 < self.start_threshold < self.interest_threshold:
            raise ValueError("need 0 < start_threshold < interest_threshold")
        if self.window_len > self.max_event_span:
            raise ValueError("window_len must not exceed max_event_span")
        if self.refractory < self.window_len:
            raise ValueError("refractory must be at least window_len so windows cannot overlap")
        if self.baseline_len < 1:
            raise ValueError("baseline_len must be >= 1")


@dataclass(frozen=True)
class Event:
    start_index: int
    is_interest: bool
    baseline: float
    window: Window | None = None


class SegmentationError(ValueError):
    pass


def _values(stream: AccelSignal | Sequence[float]) -> FloatArray:
    if isinstance(stream, AccelSignal):
        return stream.samples
    return np.asarray(stream, dtype=np.float64)


def estimate_baseline(stream, upto_index: int, baseline_len: int = 26) -> float:
    """Median of the ``baseline_len`` samples preceding ``upto_index``."""
    x = _values(stream)
    if upto_index < 1:
        raise ValueError("baseline needs at least one preceding sample")
    lo = max(0, upto_index - baseline_len)
    return float(np.median(x[lo:upto_index]))


def extract_window(stream, start_index: int, cfg: DetectorConfig = DetectorConfig(),
                   baseline: float | None = None, axis: Axis | str | None = None) -> Window:
    """Cut ``cfg.window_len`` samples from ``start_index``, padding past the end with the baseline."""
    x = _values(stream)
    if not 0 <= start_index < x.size:
        raise IndexError(f"start_index {start_index} outside stream of length {x.size}")
    if baseline is None:
        baseline = estimate_baseline(x, start_index, cfg.baseline_len) if start_index > 0 else 0.0
    if axis is None:
        axis = stream.axis if isinstance(stream, AccelSignal) else Axis.Z
    seg = x[start_index:start_index + cfg.window_len]
    out = np.full(cfg.window_len, float(baseline))
    out[:seg.size] = seg
    return Window(out, axis)


class StreamingDetector:
    """Incremental detector for a single stream.

    Samples are pushed as they arrive; an event is emitted once enough
    lookahead is buffered to decide it (``max_event_span`` samples) and to
    cut its window. ``flush`` finalises the stream, padding a trailing
    window with the event baseline. Pushing a whole stream and flushing
    gives exactly the output of :func:`detect_events`.
    """

    def __init__(self, cfg: DetectorConfig = DetectorConfig(), axis: Axis | str = Axis.Z):
        self.cfg = cfg
        self.axis = Axis(axis)
        self._buf: list[float] = []
        self._i = cfg.baseline_len

    def push(self, values) -> list[Event]:
        self._buf.extend(float(v) for v in np.atleast_1d(values))
        return self._scan(final=False)

    def flush(self) -> list[Event]:
        return self._scan(final=True)

    def _scan(self, final: bool) -> list[Event]:
        cfg = self.cfg
        x = np.asarray(self._buf)
        n = x.size
        need = max(cfg.max_event_span, cfg.window_len)
        events = []
        while self._i < n:
            i = self._i
            base = estimate_baseline(x, i, cfg.baseline_len)
            if abs(x[i] - base) <= cfg.start_threshold:
                self._i += 1
                continue
            if not final and i + need > n:
                break
            span = x[i:i + cfg.max_event_span]
            interest = bool(np.any(np.abs(span - base) > cfg.interest_threshold))
            win = extract_window(x, i, cfg, baseline=base, axis=self.axis) if interest else None
            events.append(Event(i, interest, base, win))
            self._i = i + cfg.refractory
        return events


def detect_events(stream: AccelSignal | Sequence[float], cfg: DetectorConfig = DetectorConfig(),
                  axis: Axis | str | None = None) -> list[Event]:
    """Scan a whole stream for events.

    An event starts at the first sample whose deviation from the rolling
    median baseline exceeds ``start_threshold``; it is of interest when some
    sample within ``max_event_span`` of the start deviates from that same
    baseline by more than ``interest_threshold``. After any event, scanning
    resumes ``refractory`` samples later. Because that resume point depends
    only on the start index, raising ``start_threshold`` can never produce
    more events.
    """
    x = _values(stream)
    if x.size < cfg.baseline_len + 1:
        raise SegmentationError(f"stream of length {x.size} is shorter than baseline_len + 1")
    if axis is None:
        axis = stream.axis if isinstance(stream, AccelSignal) else Axis.Z
    det = StreamingDetector(cfg, axis)
    return det.push(x) + det.flush()


def interest_window(stream: AccelSignal, cfg: DetectorConfig = DetectorConfig()) -> Window:
    """Window of the first interest event in ``stream``."""
    for ev in detect_events(stream, cfg):
        if ev.is_interest:
            return ev.window
    raise SegmentationError(f"no event of interest on {stream.axis.value} axis")


def sample_windows(sample: TrickSample, cfg: DetectorConfig = DetectorConfig()) -> dict[Axis, Window]:
    return {sig.axis: interest_window(sig, cfg) for sig in sample.signals}


# windows CSV: one row per interest window

WINDOW_COLUMNS = ["sample_id", "label", "axis", "event_index", "start_index"] + [f"v{i:02d}" for i in range(WINDOW_LEN)]


@dataclass(frozen=True)
class WindowRecord:
    sample_id: int
    label: str
    axis: Axis
    event_index: int
    start_index: int
    window: Window


def segment_dataset(dataset, cfg: DetectorConfig = DetectorConfig()) -> list[WindowRecord]:
    records = []
    for s in dataset.samples:
        for sig in s.signals:
            events = [e for e in detect_events(sig, cfg) if e.is_interest]
            for k, ev in enumerate(events):
                records.append(WindowRecord(s.id, s.label.name, sig.axis, k, ev.start_index, ev.window))
    return records


def write_windows(records: Sequence[WindowRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WINDOW_COLUMNS)
        for r in records:
            w.writerow([r.sample_id, r.label, r.axis.value, r.event_index, r.start_index]
                       + [repr(float(v)) for v in r.window.values])


def read_windows(path) -> list[WindowRecord]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != WINDOW_COLUMNS:
            raise ValueError("unexpected windows CSV header")
        for row in reader:
            axis = Axis(row[2])
            out.append(WindowRecord(int(row[0]), row[1], axis, int(row[3]), int(row[4]),
                                    Window([float(v) for v in row[5:]], axis)))
    return out
