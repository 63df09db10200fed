"""Seeded synthesis of artificial trick signatures.

Each (class, axis) signature is a sum of triangles whose base, height and
timing are drawn from clipped Gaussians, smoothed with a causal moving
average and then corrupted with white Gaussian noise. The per-class parameters live in a JSON
signature library shipped as package data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    AXES,
    CLASSES,
    SAMPLE_RATE_HZ,
    AccelSignal,
    Axis,
    Dataset,
    FloatArray,
    TrickClass,
    TrickSample,
    stance_for,
)

LIBRARY_SCHEMA_VERSION = 1
MIN_SIGNAL_LEN = 90
MIN_BASE = 2.0
CLIP_SD = 2.0  # drawn bases/heights are limited to mean +/- CLIP_SD * sd
MA_ORDER = 2
DEFAULT_LENGTH = 128

DEFAULT_COUNTS: dict[TrickClass, int] = {
    TrickClass.NOLLIE: 32,
    TrickClass.NSHOV: 42,
    TrickClass.FLIP: 37,
    TrickClass.SHOV: 32,
    TrickClass.OLLIE: 38,
}

PRNG_ID = "pcg64/seedseq(seed,spawn_key=(sample_index,))/u53/box-muller-cos"


class RngStream:
    """Deterministic random stream with a documented Gaussian transform.

    Uniforms come from numpy's PCG64 bit generator: each 64-bit raw output
    ``r`` gives ``u = (r >> 11) * 2**-53`` in [0, 1). A standard normal uses
    two uniforms via the cosine branch of Box-Muller,
    ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``. Streams for independent tasks
    are split with ``SeedSequence(seed, spawn_key=key)``.
    """

    algorithm = PRNG_ID

    def __init__(self, seed: int, key: Sequence[int] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._bitgen = np.random.PCG64(ss)

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.key + (index,))

    def uniform(self, n: int) -> FloatArray:
        raw = self._bitgen.random_raw(n)
        return (raw >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normal(self, n: int) -> FloatArray:
        u = self.uniform(2 * n)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def gauss(self) -> float:
        return float(self.normal(1)[0])


@dataclass(frozen=True)
class TrianglePrimitive:
    center_mean: float
    base_mean: float
    height_mean: float
    base_sd: float = 0.0
    height_sd: float = 0.0
    center_sd: float = 0.0  # timing jitter, e.g. varying airtime

    def __post_init__(self) -> None:
        if not self.base_mean > 0:
            raise ValueError("base_mean must be positive")
        if min(self.base_sd, self.height_sd, self.center_sd) < 0:
            raise ValueError("standard deviations must be non-negative")

    def draw(self, rng: RngStream) -> tuple[float, float, float]:
        """Return (center, base, height) for one realisation.

        Three standard normals are consumed per triangle, in the order base,
        height, center, each clipped to +/- CLIP_SD.
        """
        zb, zh, zc = np.clip(rng.normal(3), -CLIP_SD, CLIP_SD)
        base = max(MIN_BASE, self.base_mean + self.base_sd * zb)
        height = self.height_mean + self.height_sd * zh
        center = self.center_mean + self.center_sd * zc
        return float(center), float(base), float(height)

    def max_abs_height(self) -> float:
        return abs(self.height_mean) + CLIP_SD * self.height_sd


@dataclass(frozen=True)
class SignatureModel:
    label: TrickClass
    axis: Axis
    triangles: tuple[TrianglePrimitive, ...]
    baseline: float = 0.0
    noise_sd: float = 0.0
    length: int = DEFAULT_LENGTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "label", TrickClass(self.label))
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "triangles", tuple(self.triangles))
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def _triangle(n: FloatArray, center: float, base: float, height: float) -> FloatArray:
    half = base / 2.0
    return height * np.maximum(0.0, 1.0 - np.abs(n - center) / half)


def render_triangles(model: SignatureModel, rng: RngStream) -> FloatArray:
    """Draw every triangle of the model and sum them on top of the baseline."""
    if model.length < MIN_SIGNAL_LEN:
        raise ValueError(f"signal length {model.length} < {MIN_SIGNAL_LEN}")
    n = np.arange(model.length, dtype=np.float64)
    out = np.full(model.length, float(model.baseline))
    for tri in model.triangles:
        out += _triangle(n, *tri.draw(rng))
    return out


def moving_average(signal: Sequence[float], order: int = MA_ORDER) -> FloatArray:
    """Causal mean over the current and ``order`` previous points.

    The window shrinks at the left edge, so ``out[n]`` averages
    ``signal[max(0, n - order) : n + 1]``.
    """
    x = np.asarray(signal, dtype=np.float64)
    if order < 1:
        raise ValueError("order must be >= 1")
    if x.size == 0:
        raise ValueError("signal must be non-empty")
    csum = np.concatenate(([0.0], np.cumsum(x)))
    hi = np.arange(1, x.size + 1)
    lo = np.maximum(0, hi - (order + 1))
    return (csum[hi] - csum[lo]) / (hi - lo)


def add_noise(signal: Sequence[float], noise_sd: float, rng: RngStream) -> FloatArray:
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    x = np.asarray(signal, dtype=np.float64)
    if noise_sd == 0:
        return x.copy()
    return x + noise_sd * rng.normal(x.size)


def synthesize(model: SignatureModel, rng: RngStream, noise: bool = True) -> FloatArray:
    """Full per-axis pipeline: triangles, then moving average, then noise."""
    smooth = moving_average(render_triangles(model, rng), MA_ORDER)
    if not noise:
        return smooth
    return add_noise(smooth, model.noise_sd, rng)


Library = Mapping[tuple[TrickClass, Axis], SignatureModel]


def generate_sample(
    library: Library,
    label: TrickClass,
    rng: RngStream,
    sample_id: int = 0,
    rate: float = SAMPLE_RATE_HZ,
    noise: bool = True,
) -> TrickSample:
    label = TrickClass(label)
    signals = []
    for axis in AXES:
        try:
            model = library[(label, axis)]
        except KeyError:
            raise KeyError(f"signature library has no entry for {label.name}/{axis.value}") from None
        signals.append(AccelSignal(axis, synthesize(model, rng, noise), rate))
    return TrickSample(sample_id, label, stance_for(label), tuple(signals))


def generate_dataset(
    library: Library,
    counts: Mapping[TrickClass, int],
    seed: int,
    rate: float = SAMPLE_RATE_HZ,
    noise: bool = True,
) -> Dataset:
    """Generate ``counts[c]`` samples per class, grouped in class order.

    Sample ``i`` (0-based position, id ``i + 1``) draws from its own stream
    ``RngStream(seed, (i,))``, so any subset can be regenerated independently
    and in any order with identical results.
    """
    root = RngStream(seed)
    samples = []
    i = 0
    for label in CLASSES:
        n = int(counts.get(label, 0))
        if n < 0:
            raise ValueError(f"negative count for {label.name}")
        for _ in range(n):
            samples.append(generate_sample(library, label, root.child(i), i + 1, rate, noise))
            i += 1
    manifest = {c.name: int(counts.get(c, 0)) for c in CLASSES if counts.get(c, 0)}
    return Dataset(tuple(samples), int(seed), manifest, rate, PRNG_ID)


# signature library file

def parse_library(doc: Mapping) -> dict[tuple[TrickClass, Axis], SignatureModel]:
    if doc.get("schema_version") != LIBRARY_SCHEMA_VERSION:
        raise ValueError(f"unsupported signature library schema_version {doc.get('schema_version')!r}")
    length = int(doc.get("length", DEFAULT_LENGTH))
    lib = {}
    for entry in doc["signatures"]:
        label, axis = TrickClass[entry["class"]], Axis(entry["axis"])
        tris = tuple(
            TrianglePrimitive(t["center"], t["base"], t["height"], t.get("base_sd", 0.0),
                              t.get("height_sd", 0.0), t.get("center_sd", 0.0))
            for t in entry["triangles"]
        )
        lib[(label, axis)] = SignatureModel(
            label, axis, tris, entry.get("baseline", 0.0), entry.get("noise_sd", 0.0), int(entry.get("length", length))
        )
    return lib


def load_library(path: str | Path | None = None) -> dict[tuple[TrickClass, Axis], SignatureModel]:
    """Load a signature library; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("skatetrick.data").joinpath("signatures.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_library(json.loads(text))


def library_to_json(library: Library) -> dict:
    sigs = []
    for (label, axis), m in sorted(library.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        sigs.append({
            "class": label.name,
            "axis": axis.value,
            "baseline": m.baseline,
            "noise_sd": m.noise_sd,
            "length": m.length,
            "triangles": [
                {"center": t.center_mean, "base": t.base_mean, "height": t.height_mean,
                 "base_sd": t.base_sd, "height_sd": t.height_sd, "center_sd": t.center_sd}
                for t in m.triangles
            ],
        })
    return {"schema_version": LIBRARY_SCHEMA_VERSION, "signatures": sigs}
