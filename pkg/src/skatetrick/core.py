"""Shared domain vocabulary: trick classes, axes, signals, samples and datasets."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

SAMPLE_RATE_HZ = 52.0
WINDOW_LEN = 82
G_MS2 = 9.8  # 1 mg = G_MS2 * 1e-3 m/s^2

CSV_COLUMNS = ("sample_id", "label", "stance", "t_index", "x_mg", "y_mg", "z_mg")


class TrickClass(IntEnum):
    """Trick labels with their canonical 1-based confusion-matrix index."""

    NOLLIE = 1
    NSHOV = 2
    FLIP = 3
    SHOV = 4
    OLLIE = 5

    @property
    def idx(self) -> int:
        """Zero-based position, used for array storage."""
        return int(self) - 1

    @classmethod
    def from_idx(cls, i: int) -> "TrickClass":
        return cls(int(i) + 1)


class Stance(str, Enum):
    REGULAR = "regular"
    GOOFY = "goofy"


class Axis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


CLASSES: tuple[TrickClass, ...] = tuple(TrickClass)
AXES: tuple[Axis, ...] = (Axis.X, Axis.Y, Axis.Z)

GOOFY_CLASSES = frozenset({TrickClass.NSHOV, TrickClass.FLIP})


def stance_for(label: TrickClass) -> Stance:
    """Stance assigned to generated samples of a class."""
    return Stance.GOOFY if label in GOOFY_CLASSES else Stance.REGULAR


def _frozen(values: Iterable[float]) -> FloatArray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AccelSignal:
    """One axis of acceleration in mg at a fixed sample rate.

    Construction does not enforce the invariants; ``validate`` reports them,
    so malformed foreign data can be loaded and inspected.
    """

    axis: Axis
    samples: FloatArray
    rate: float = SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "samples", _frozen(self.samples))
        object.__setattr__(self, "rate", float(self.rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AccelSignal):
            return NotImplemented
        return (
            self.axis == other.axis
            and self.rate == other.rate
            and np.array_equal(self.samples, other.samples, equal_nan=True)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Window:
    """Fixed-length classifier input cut from one axis signal."""

    values: FloatArray
    axis: Axis

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != (WINDOW_LEN,):
            raise ValueError(f"window must hold exactly {WINDOW_LEN} values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("window values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axis", Axis(self.axis))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Window):
            return NotImplemented
        return self.axis == other.axis and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class TrickSample:
    id: int
    label: TrickClass
    stance: Stance
    signals: tuple[AccelSignal, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", TrickClass(self.label))
        object.__setattr__(self, "stance", Stance(self.stance))
        object.__setattr__(self, "signals", tuple(self.signals))

    def signal(self, axis: Axis | str) -> AccelSignal:
        axis = Axis(axis)
        for sig in self.signals:
            if sig.axis == axis:
                return sig
        raise KeyError(f"sample {self.id} has no {axis.value} signal")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[TrickSample, ...] = ()
    seed: int = 0
    manifest: Mapping[str, int] = field(default_factory=dict)
    rate: float = SAMPLE_RATE_HZ
    prng: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        # zero counts are dropped so an empty dataset has an empty manifest
        object.__setattr__(self, "manifest", {k: int(v) for k, v in dict(self.manifest).items() if v})

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_signals(self) -> int:
        return sum(len(s.signals) for s in self.samples)

    def of_class(self, label: TrickClass) -> tuple[TrickSample, ...]:
        return tuple(s for s in self.samples if s.label == label)

    def subset(self, ids: Iterable[int]) -> "Dataset":
        keep = set(ids)
        chosen = [s for s in self.samples if s.id in keep]
        return Dataset(chosen, self.seed, _manifest_for(chosen), self.rate, self.prng)


def _manifest_for(samples: Sequence[TrickSample]) -> dict[str, int]:
    counts = {c.name: 0 for c in CLASSES}
    for s in samples:
        counts[s.label.name] += 1
    return counts


def class_counts(dataset: Dataset) -> dict[TrickClass, int]:
    counts = {c: 0 for c in CLASSES}
    for s in dataset.samples:
        counts[s.label] += 1
    return counts


@dataclass(frozen=True)
class Violation:
    sample_id: int | None
    rule: str
    detail: str


def validate(dataset: Dataset) -> list[Violation]:
    """Check every dataset invariant; an empty list means the dataset is well formed."""
    out: list[Violation] = []
    seen: set[int] = set()
    rates: set[float] = set()
    for s in dataset.samples:
        if s.id in seen:
            out.append(Violation(s.id, "unique-id", "duplicate sample id"))
        seen.add(s.id)
        axes = [sig.axis for sig in s.signals]
        if sorted(a.value for a in axes) != [a.value for a in AXES]:
            out.append(Violation(s.id, "one-signal-per-axis", f"axes present: {[a.value for a in axes]}"))
        if s.stance != stance_for(s.label):
            out.append(Violation(s.id, "stance", f"{s.label.name} must be {stance_for(s.label).value}"))
        lengths = {len(sig) for sig in s.signals}
        if len(lengths) > 1:
            out.append(Violation(s.id, "equal-length", f"signal lengths {sorted(lengths)}"))
        if len({sig.rate for sig in s.signals}) > 1:
            out.append(Violation(s.id, "equal-rate", "signals carry different rates"))
        for sig in s.signals:
            rates.add(sig.rate)
            if len(sig) == 0:
                out.append(Violation(s.id, "non-empty", f"{sig.axis.value} signal is empty"))
            elif not np.all(np.isfinite(sig.samples)):
                out.append(Violation(s.id, "finite", f"{sig.axis.value} signal has non-finite values"))
            if not sig.rate > 0:
                out.append(Violation(s.id, "rate-positive", f"{sig.axis.value} rate {sig.rate}"))
    if len(rates) > 1:
        out.append(Violation(None, "shared-rate", f"rates in dataset: {sorted(rates)}"))
    actual = _manifest_for(dataset.samples)
    declared = {c.name: int(dataset.manifest.get(c.name, 0)) for c in CLASSES}
    if declared != actual:
        out.append(Violation(None, "manifest-counts", f"manifest {declared} != actual {actual}"))
    return out


# persistence

def write_dataset(dataset: Dataset, csv_path: str | Path, manifest_path: str | Path | None = None) -> None:
    """Write the dataset CSV and, optionally, its manifest JSON.

    Floats are written with ``repr`` so that reading them back is exact.
    """
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in dataset.samples:
            x, y, z = (s.signal(a).samples for a in AXES)
            for t in range(len(x)):
                w.writerow([s.id, s.label.name, s.stance.value, t, repr(float(x[t])), repr(float(y[t])), repr(float(z[t]))])
    if manifest_path is not None:
        Path(manifest_path).write_text(manifest_json(dataset), encoding="utf-8")


def manifest_json(dataset: Dataset) -> str:
    doc = {
        "seed": dataset.seed,
        "rate_hz": dataset.rate,
        "counts": {c.name: int(dataset.manifest.get(c.name, 0)) for c in CLASSES},
        "prng": dataset.prng,
    }
    return json.dumps(doc, indent=2) + "\n"


def read_dataset(csv_path: str | Path, manifest_path: str | Path | None = None) -> Dataset:
    rows: dict[int, dict] = {}
    with Path(csv_path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for r in reader:
            sid = int(r["sample_id"])
            entry = rows.setdefault(sid, {"label": r["label"], "stance": r["stance"], "t": [], "x": [], "y": [], "z": []})
            entry["t"].append(int(r["t_index"]))
            entry["x"].append(float(r["x_mg"]))
            entry["y"].append(float(r["y_mg"]))
            entry["z"].append(float(r["z_mg"]))

    seed, rate, prng, manifest = 0, SAMPLE_RATE_HZ, "", None
    if manifest_path is not None:
        doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        seed, rate = int(doc["seed"]), float(doc["rate_hz"])
        prng = doc.get("prng", "")
        manifest = doc["counts"]

    samples = []
    for sid, e in rows.items():
        order = np.argsort(e["t"], kind="stable")
        sigs = tuple(AccelSignal(a, np.asarray(e[k])[order], rate) for a, k in zip(AXES, "xyz"))
        samples.append(TrickSample(sid, TrickClass[e["label"]], Stance(e["stance"]), sigs))
    if manifest is None:
        manifest = _manifest_for(samples)
    return Dataset(tuple(samples), seed, manifest, rate, prng)
