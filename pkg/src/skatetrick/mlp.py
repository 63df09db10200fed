"""Feed-forward network (tanh hidden layer, softmax output) and its training."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import CLASSES, WINDOW_LEN, FloatArray, TrickClass
from .scg import ScgState, scg_minimize

MODEL_SCHEMA_VERSION = 1
PROB_FLOOR = 1e-12  # probabilities are floored here before taking logs
INPUT_SCALE_MG = 16000.0  # +/-16 g full scale
DEFAULT_DIMS = (WINDOW_LEN, 28, len(CLASSES))


@dataclass(frozen=True, eq=False)
class MlpModel:
    W1: FloatArray
    b1: FloatArray
    W2: FloatArray
    b2: FloatArray
    input_offset: float = 0.0
    input_scale: float = INPUT_SCALE_MG
    trained_axis: str = ""
    seed: int | None = None
    hidden_activation: str = "tansig"
    output_activation: str = "softmax"

    def __post_init__(self) -> None:
        for name in ("W1", "b1", "W2", "b2"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        h, d = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[1] != h or self.b2.shape != (self.W2.shape[0],):
            raise ValueError("inconsistent layer shapes")
        if self.input_scale == 0:
            raise ValueError("input_scale must be non-zero")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    @property
    def n_weights(self) -> int:
        return self.W1.size + self.b1.size + self.W2.size + self.b2.size

    def flat(self) -> FloatArray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def params(self) -> tuple[FloatArray, ...]:
        return self.W1, self.b1, self.W2, self.b2

    def with_flat(self, w: FloatArray) -> "MlpModel":
        W1, b1, W2, b2 = _unpack(w, self.dims)
        return replace(self, W1=W1, b1=b1, W2=W2, b2=b2)

    def scale(self, x) -> FloatArray:
        return (np.asarray(x, dtype=np.float64) - self.input_offset) / self.input_scale


def _unpack(w: FloatArray, dims: Sequence[int]) -> tuple[FloatArray, ...]:
    d, h, o = dims
    i = 0
    parts = []
    for shape in ((h, d), (h,), (o, h), (o,)):
        size = int(np.prod(shape))
        parts.append(np.asarray(w[i:i + size]).reshape(shape))
        i += size
    return tuple(parts)


def hidden_layer_bound(n_patterns: float, allowed_error: float, n_in: int, n_out: int) -> int:
    """Upper bound on hidden units, ``floor(N * N_train / (N_in + N_out))``, taken literally."""
    if n_in + n_out == 0:
        raise ValueError("n_in + n_out must be non-zero")
    if min(n_patterns, allowed_error, n_in, n_out) <= 0:
        raise ValueError("all arguments must be positive")
    # round first so 870 * 0.1 / 87 does not floor to 0
    return math.floor(round(n_patterns * allowed_error / (n_in + n_out), 9))


def init_model(dims: Sequence[int] = DEFAULT_DIMS, seed: int = 0, **kwargs) -> MlpModel:
    """Uniform weights in +/- 1/sqrt(fan_in), zero biases."""
    d, h, o = dims
    rng = np.random.default_rng(seed)
    W1 = rng.uniform(-1.0, 1.0, (h, d)) / np.sqrt(d)
    W2 = rng.uniform(-1.0, 1.0, (o, h)) / np.sqrt(h)
    return MlpModel(W1, np.zeros(h), W2, np.zeros(o), seed=seed, **kwargs)


def _softmax(z: FloatArray) -> FloatArray:
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def _logits(params, xs: FloatArray) -> tuple[FloatArray, FloatArray]:
    W1, b1, W2, b2 = params
    hidden = np.tanh(xs @ W1.T + b1)
    return hidden, hidden @ W2.T + b2


def forward(model: MlpModel, x) -> FloatArray:
    """Class probabilities for one raw window (shape ``(d,)``) or a batch ``(n, d)``."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    _, z = _logits(model.params(), model.scale(x))
    return _softmax(z)


def cross_entropy(predicted, target: TrickClass | int) -> float:
    """``-log p[target]`` with ``p`` floored at PROB_FLOOR.

    ``target`` is a TrickClass or a zero-based column index.
    """
    p = np.asarray(predicted, dtype=np.float64)
    j = target.idx if isinstance(target, TrickClass) else int(target)
    return float(-np.log(max(p[j], PROB_FLOOR)))


def _targets_idx(labels) -> np.ndarray:
    return np.array([l.idx if isinstance(l, TrickClass) else int(l) for l in labels], dtype=np.intp)


def mean_loss(params, xs_scaled: FloatArray, y: np.ndarray) -> float:
    """Mean cross-entropy on already-scaled inputs, via a stable log-softmax."""
    _, z = _logits(params, xs_scaled)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def _grad_flat(params, xs: FloatArray, y: np.ndarray) -> FloatArray:
    n = xs.shape[0]
    hidden, z = _logits(params, xs)
    d2 = _softmax(z)
    d2[np.arange(n), y] -= 1.0
    d2 /= n
    d1 = (d2 @ params[2]) * (1.0 - hidden ** 2)
    return np.concatenate([(d1.T @ xs).ravel(), d1.sum(0), (d2.T @ hidden).ravel(), d2.sum(0)])


@dataclass(frozen=True)
class Gradient:
    W1: FloatArray
    b1: FloatArray
    W2: FloatArray
    b2: FloatArray


def gradient(model: MlpModel, windows, labels) -> Gradient:
    """Mean cross-entropy gradient over a batch of raw windows, by backpropagation."""
    xs = model.scale(np.atleast_2d(np.asarray(windows, dtype=np.float64)))
    y = _targets_idx(labels)
    if y.size == 0:
        raise ValueError("batch must be non-empty")
    return Gradient(*_unpack(_grad_flat(model.params(), xs, y), model.dims))


def classify(model: MlpModel, window) -> TrickClass:
    return TrickClass.from_idx(int(np.argmax(forward(model, window))))


def classify_batch(model: MlpModel, windows) -> list[TrickClass]:
    return [TrickClass.from_idx(int(i)) for i in np.argmax(forward(model, windows), axis=1)]


def fuse_axes(pred_x, pred_y, pred_z) -> TrickClass:
    """Majority vote of per-axis decisions.

    With three different votes, the class with the single highest
    probability among the three vectors wins. Ties go to the lower class
    index.
    """
    probs = [np.asarray(p, dtype=np.float64) for p in (pred_x, pred_y, pred_z)]
    votes = [int(np.argmax(p)) for p in probs]
    counts = np.bincount(votes, minlength=probs[0].size)
    if counts.max() >= 2:
        return TrickClass.from_idx(int(np.argmax(counts)))
    best = np.max(np.vstack(probs), axis=0)
    return TrickClass.from_idx(int(np.argmax(best)))


# data split

def split_indices(labels: Sequence[TrickClass], val_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Stratified train/validation split of positions ``0..len(labels)-1``.

    The validation total is ``floor(N * f + 0.5)``. Each class first gets
    ``floor(n_c * f)`` slots; leftover slots go to the largest fractional
    remainders, ties to the lower class index. No class gives up its last
    training sample. Members are picked by a seeded permutation within
    each class; both lists come back sorted.
    """
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    labels = [TrickClass(l) for l in labels]
    by_class = {c: [i for i, l in enumerate(labels) if l == c] for c in CLASSES}
    present = [c for c in CLASSES if by_class[c]]
    missing = [c.name for c in CLASSES if not by_class[c]]
    if missing:
        raise ValueError(f"classes without samples: {missing}")
    quota = {c: len(by_class[c]) * val_fraction for c in present}
    n_val = {c: math.floor(q) for c, q in quota.items()}
    leftover = math.floor(len(labels) * val_fraction + 0.5) - sum(n_val.values())
    for c in sorted(present, key=lambda c: (-round(quota[c] - n_val[c], 9), c))[:max(0, leftover)]:
        n_val[c] += 1
    rng = np.random.default_rng(seed)
    train, val = [], []
    for c in present:
        members = by_class[c]
        k = min(n_val[c], len(members) - 1)
        perm = rng.permutation(len(members))
        chosen = {members[j] for j in perm[:k]}
        val += sorted(chosen)
        train += [m for m in members if m not in chosen]
    return sorted(train), sorted(val)


def split_dataset(dataset, val_fraction: float = 0.2, seed: int = 0):
    labels = [s.label for s in dataset.samples]
    tr, va = split_indices(labels, val_fraction, seed)
    ids = [s.id for s in dataset.samples]
    return dataset.subset(ids[i] for i in tr), dataset.subset(ids[i] for i in va)


# training

@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    max_epochs: int = 200
    val_fraction: float = 0.2
    patience: int = 6
    sigma0: float = 5e-5
    lambda0: float = 5e-7
    min_grad: float = 1e-6
    input_scale: float = INPUT_SCALE_MG
    input_offset: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.sigma0 <= 0 or self.lambda0 < 0:
            raise ValueError("need sigma0 > 0 and lambda0 >= 0")


@dataclass
class TrainReport:
    train_ce: list[float] = field(default_factory=list)
    val_ce: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_ce: float = float("nan")
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.train_ce) - 1


class NumericError(RuntimeError):
    pass


def train_scg(model: MlpModel, x_train, y_train, x_val=None, y_val=None,
              cfg: TrainConfig = TrainConfig()) -> tuple[MlpModel, TrainReport]:
    """Full-batch SCG training with early stopping on validation cross-entropy.

    Epoch 0 records the initial losses; every SCG iteration is one epoch.
    The returned model holds the weights of the epoch with the lowest
    validation cross-entropy (training cross-entropy if no validation set
    is given). Training stops after ``cfg.patience`` consecutive epochs with
    a worse validation loss than the best so far.
    """
    model = replace(model, input_scale=cfg.input_scale, input_offset=cfg.input_offset)
    xs = model.scale(np.atleast_2d(np.asarray(x_train, dtype=np.float64)))
    y = _targets_idx(y_train)
    if len(set(y.tolist())) < 2:
        raise ValueError("training data must contain at least two classes")
    has_val = x_val is not None and len(x_val) > 0
    if has_val:
        xv = model.scale(np.atleast_2d(np.asarray(x_val, dtype=np.float64)))
        yv = _targets_idx(y_val)

    dims = model.dims

    def fun(w):
        return mean_loss(_unpack(w, dims), xs, y)

    def grad(w):
        return _grad_flat(_unpack(w, dims), xs, y)

    report = TrainReport()
    best = {"w": model.flat(), "val": math.inf, "epoch": 0}
    fails = 0

    def record(epoch: int, w, train_loss: float) -> bool:
        nonlocal fails
        if not math.isfinite(train_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        val_loss = mean_loss(_unpack(w, dims), xv, yv) if has_val else train_loss
        report.train_ce.append(train_loss)
        report.val_ce.append(val_loss)
        if val_loss < best["val"]:
            best.update(w=np.array(w), val=val_loss, epoch=epoch)
            fails = 0
        elif val_loss > best["val"]:
            fails += 1
        return has_val and fails >= cfg.patience

    w0 = model.flat()
    record(0, w0, fun(w0))

    def callback(state: ScgState) -> bool:
        return record(state.iteration, state.w, state.loss)

    _, reason = scg_minimize(fun, grad, w0, cfg.max_epochs, cfg.sigma0, cfg.lambda0, cfg.min_grad, callback)
    report.stop_reason = {"callback": "patience", "max_iter": "max_epochs"}.get(reason, reason)
    report.best_epoch = best["epoch"]
    report.best_val_ce = best["val"]
    return model.with_flat(best["w"]), report


# persistence

def model_to_json(model: MlpModel) -> str:
    d, h, o = model.dims
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "dims": [d, h, o],
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "W2": model.W2.tolist(),
        "b2": model.b2.tolist(),
        "activations": {"hidden": model.hidden_activation, "output": model.output_activation},
        "scaling": {"offset": model.input_offset, "scale": model.input_scale},
        "trained_axis": model.trained_axis,
        "seed": model.seed,
    }
    return json.dumps(doc) + "\n"


def model_from_json(text: str) -> MlpModel:
    doc = json.loads(text)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError("unsupported model schema_version")
    m = MlpModel(
        doc["W1"], doc["b1"], doc["W2"], doc["b2"],
        input_offset=doc["scaling"]["offset"], input_scale=doc["scaling"]["scale"],
        trained_axis=doc["trained_axis"], seed=doc["seed"],
        hidden_activation=doc["activations"]["hidden"], output_activation=doc["activations"]["output"],
    )
    if list(m.dims) != list(doc["dims"]):
        raise ValueError("dims do not match weight shapes")
    return m


def save_model(model: MlpModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> MlpModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
