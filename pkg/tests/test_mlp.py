import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skatetrick.core import CLASSES, TrickClass, Window
from skatetrick.mlp import (
    MlpModel,
    NumericError,
    TrainConfig,
    _grad_flat,
    _unpack,
    classify,
    cross_entropy,
    forward,
    fuse_axes,
    gradient,
    hidden_layer_bound,
    init_model,
    load_model,
    mean_loss,
    model_from_json,
    model_to_json,
    save_model,
    split_dataset,
    split_indices,
    train_scg,
)
from skatetrick.scg import scg_minimize
from skatetrick.synthgen import DEFAULT_COUNTS


def zero_model(dims=(82, 28, 5)):
    d, h, o = dims
    return MlpModel(np.zeros((h, d)), np.zeros(h), np.zeros((o, h)), np.zeros(o))


def fd_gradient(model, x, y, idx, h=1e-4):
    """Central differences of the mean loss with respect to the chosen flat weights."""
    w = model.flat()
    xs = model.scale(x)
    out = []
    for i in idx:
        e = np.zeros_like(w)
        e[i] = h
        up = mean_loss(_unpack(w + e, model.dims), xs, y)
        down = mean_loss(_unpack(w - e, model.dims), xs, y)
        out.append((up - down) / (2 * h))
    return np.array(out)


class TestHiddenBound:
    @pytest.mark.parametrize("n,err,want", [(870, 0.1, 1), (87, 1, 1), (2436, 1, 28)])
    def test_examples(self, n, err, want):
        assert hidden_layer_bound(n, err, 82, 5) == want

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            hidden_layer_bound(0, 1, 82, 5)


class TestInit:
    def test_same_seed(self):
        assert np.array_equal(init_model(seed=3).flat(), init_model(seed=3).flat())

    def test_different_seed(self):
        assert not np.array_equal(init_model(seed=3).flat(), init_model(seed=4).flat())

    def test_shapes_and_range(self):
        m = init_model(seed=0)
        assert m.dims == (82, 28, 5) and m.n_weights == 82 * 28 + 28 + 28 * 5 + 5
        assert np.abs(m.W1).max() <= 1 / math.sqrt(82) and not m.b1.any()

    def test_rejects_non_finite(self):
        W1 = np.zeros((2, 1))
        W1[0, 0] = np.nan
        with pytest.raises(ValueError):
            MlpModel(W1, np.zeros(2), np.zeros((2, 2)), np.zeros(2))


class TestForward:
    def test_zero_weights_uniform(self):
        assert np.allclose(forward(zero_model(), np.ones(82)), 0.2, atol=0)

    def test_hand_computed_1_2_2(self):
        m = MlpModel([[1.0], [-2.0]], [0.1, 0.2], [[1.0, 0.5], [-1.0, 2.0]], [0.0, 0.3], input_scale=1.0)
        h1, h2 = math.tanh(0.5 * 1.0 + 0.1), math.tanh(0.5 * -2.0 + 0.2)
        z1, z2 = 1.0 * h1 + 0.5 * h2, -1.0 * h1 + 2.0 * h2 + 0.3
        p1 = math.exp(z1) / (math.exp(z1) + math.exp(z2))
        got = forward(m, [0.5])
        assert got[0] == pytest.approx(p1, abs=1e-12) and got[1] == pytest.approx(1 - p1, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-1e5, 1e5))
    def test_sums_to_one_and_positive(self, seed, level):
        m = init_model(seed=seed)
        x = np.random.default_rng(seed).normal(level, 5000, 82)
        p = forward(m, x)
        assert abs(p.sum() - 1) <= 1e-9 and np.all(p > 0)

    def test_scaling_is_stored(self, rng):
        m = init_model(seed=1)
        x = rng.normal(0, 8000, 82)
        shifted = MlpModel(*m.params(), input_offset=100.0, input_scale=32000.0)
        direct = init_model(seed=1)
        assert np.allclose(forward(shifted, x), forward(direct, (x - 100.0) / 2))

    def test_accepts_window_and_batch(self, rng):
        m = init_model(seed=2)
        x = rng.normal(0, 5000, (3, 82))
        batch = forward(m, x)
        assert batch.shape == (3, 5)
        assert np.allclose(forward(m, Window(x[1], "Z")), batch[1])

    def test_rejects_nan(self):
        x = np.zeros(82)
        x[0] = np.nan
        with pytest.raises(ValueError):
            forward(init_model(), x)


class TestCrossEntropy:
    def test_one_hot(self):
        assert cross_entropy([0, 0, 1, 0, 0], TrickClass.FLIP) == pytest.approx(0.0, abs=1e-15)

    def test_uniform(self):
        assert cross_entropy([0.2] * 5, TrickClass.OLLIE) == pytest.approx(math.log(5), abs=1e-12)

    def test_half(self):
        assert cross_entropy([0.5, 0.5, 0, 0, 0], TrickClass.NOLLIE) == pytest.approx(math.log(2), abs=1e-12)

    def test_zero_is_floored(self):
        assert math.isfinite(cross_entropy([1, 0, 0, 0, 0], TrickClass.OLLIE))


class TestGradient:
    def test_zero_model_output_layer(self):
        g = gradient(zero_model(), np.ones((1, 82)) * 3000, [TrickClass.SHOV])
        expected_b2 = np.full(5, 0.2)
        expected_b2[TrickClass.SHOV.idx] -= 1
        assert np.allclose(g.b2, expected_b2, atol=1e-15)
        # hidden units are tanh(0) = 0, so the outer product vanishes
        assert not g.W2.any() and not g.W1.any() and not g.b1.any()

    def test_duplicate_example(self, rng):
        m = init_model(seed=4)
        x = rng.normal(0, 5000, 82)
        single = gradient(m, x[None], [TrickClass.NSHOV])
        double = gradient(m, np.vstack([x, x]), [TrickClass.NSHOV] * 2)
        for a, b in zip((single.W1, single.b1, single.W2, single.b2), (double.W1, double.b1, double.W2, double.b2)):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_matches_finite_differences(self, rng):
        m = init_model(seed=6)
        x = rng.normal(0, 6000, (4, 82))
        y = np.array([0, 3, 4, 1])
        g = _grad_flat(m.params(), m.scale(x), y)
        idx = rng.choice(m.n_weights, 60, replace=False)
        fd = fd_gradient(m, x, y, idx)
        rel = np.abs(g[idx] - fd) / np.maximum(np.maximum(np.abs(g[idx]), np.abs(fd)), 1e-5)
        assert rel.max() <= 1e-5

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            gradient(init_model(), np.zeros((0, 82)), [])


class TestClassifyAndFuse:
    def test_argmax(self):
        m = MlpModel(np.zeros((1, 82)), np.zeros(1), np.zeros((5, 1)), np.log([0.1, 0.6, 0.1, 0.1, 0.1]))
        assert classify(m, np.zeros(82)) is TrickClass.NSHOV

    def test_tie_goes_to_lowest(self):
        m = MlpModel(np.zeros((1, 82)), np.zeros(1), np.zeros((5, 1)), np.array([1.0, 0, 0, 0, 1.0]))
        assert classify(m, np.zeros(82)) is TrickClass.NOLLIE

    def test_fuse_unanimous(self):
        p = [0.1, 0.1, 0.6, 0.1, 0.1]
        assert fuse_axes(p, p, p) is TrickClass.FLIP

    def test_fuse_majority(self):
        one, four = [0.9, 0, 0, 0.1, 0], [0.1, 0, 0, 0.9, 0]
        assert fuse_axes(one, one, four) is TrickClass.NOLLIE

    def test_fuse_disagreement(self):
        x = [0.5, 0.2, 0.1, 0.1, 0.1]
        y = [0.05, 0.9, 0.05, 0, 0]
        z = [0.1, 0.1, 0.6, 0.1, 0.1]
        assert fuse_axes(x, y, z) is TrickClass.NSHOV

    def test_fuse_disagreement_tie(self):
        x = [0.7, 0.3, 0, 0, 0]
        y = [0.3, 0, 0, 0, 0.7]
        z = [0, 0, 0.6, 0.4, 0]
        assert fuse_axes(x, y, z) is TrickClass.NOLLIE


class TestSplit:
    def test_default_counts_give_36(self):
        labels = [c for c in CLASSES for _ in range(DEFAULT_COUNTS[c])]
        train, val = split_indices(labels, 0.2, seed=0)
        assert len(val) == 36 and len(train) == 145
        per_class = {c: sum(labels[i] == c for i in val) for c in CLASSES}
        # 6.4, 8.4, 7.4, 6.4, 7.6 floor to 34; one leftover slot each to OLLIE (0.6) and NOLLIE (0.4, lowest index)
        assert per_class == {TrickClass.NOLLIE: 7, TrickClass.NSHOV: 8, TrickClass.FLIP: 7,
                             TrickClass.SHOV: 6, TrickClass.OLLIE: 8}

    def test_disjoint_and_deterministic(self):
        labels = [CLASSES[i % 5] for i in range(53)]
        a = split_indices(labels, 0.3, 9)
        assert a == split_indices(labels, 0.3, 9)
        assert not set(a[0]) & set(a[1]) and sorted(a[0] + a[1]) == list(range(53))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 12), min_size=5, max_size=5), st.floats(0.01, 0.99), st.integers(0, 100))
    def test_every_class_keeps_training_samples(self, counts, frac, seed):
        labels = [c for c, n in zip(CLASSES, counts) for _ in range(n)]
        train, _ = split_indices(labels, frac, seed)
        assert {labels[i] for i in train} == set(CLASSES)

    def test_missing_class(self):
        with pytest.raises(ValueError):
            split_indices([TrickClass.OLLIE] * 5, 0.2, 0)

    def test_split_dataset(self, default_dataset):
        tr, va = split_dataset(default_dataset, 0.2, seed=1)
        assert len(tr) + len(va) == 181 and len(va) == 36
        assert not {s.id for s in tr.samples} & {s.id for s in va.samples}


XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
XOR_Y = [0, 1, 1, 0]


class TestScg:
    def test_quadratic(self, rng):
        a = rng.normal(size=(6, 6))
        hess = a @ a.T + 6 * np.eye(6)
        b = rng.normal(size=6)
        w, reason = scg_minimize(lambda w: 0.5 * w @ hess @ w - b @ w, lambda w: hess @ w - b, np.zeros(6),
                                 max_iter=20, min_grad=1e-7)
        assert reason == "min_grad"
        assert np.allclose(w, np.linalg.solve(hess, b), atol=1e-7)

    def test_rosenbrock(self):
        f = lambda w: (1 - w[0]) ** 2 + 100 * (w[1] - w[0] ** 2) ** 2
        g = lambda w: np.array([-2 * (1 - w[0]) - 400 * w[0] * (w[1] - w[0] ** 2), 200 * (w[1] - w[0] ** 2)])
        w, _ = scg_minimize(f, g, np.array([-1.2, 1.0]), max_iter=2000, min_grad=1e-9)
        assert np.allclose(w, [1, 1], atol=1e-4)

    def test_callback_stops(self):
        seen = []
        _, reason = scg_minimize(lambda w: float(w @ w), lambda w: 2 * w, np.ones(3), max_iter=50,
                                 callback=lambda s: seen.append(s.iteration) or True)
        assert reason == "callback" and seen == [1]

    def test_xor(self):
        solved = 0
        for seed in range(10):
            cfg = TrainConfig(seed=seed, max_epochs=500, input_scale=1.0, min_grad=1e-9)
            _, rep = train_scg(init_model((2, 4, 2), seed=seed), XOR_X, XOR_Y, cfg=cfg)
            solved += min(rep.train_ce) < 0.01 and rep.epochs <= 500
        assert solved >= 8


class TestTrain:
    @pytest.fixture(scope="class")
    @staticmethod
    def data():
        r = np.random.default_rng(0)
        protos = r.normal(0, 8000, (5, 82))
        x = np.vstack([protos[k % 5] + r.normal(0, 4000, 82) for k in range(150)])
        y = [CLASSES[k % 5] for k in range(150)]
        return x[:120], y[:120], x[120:], y[120:]

    def test_training_loss_never_increases(self, data):
        _, rep = train_scg(init_model(seed=1), *data, TrainConfig(seed=1, patience=1000, max_epochs=60))
        assert np.all(np.diff(rep.train_ce) <= 0.0)

    def test_best_epoch_is_val_argmin(self, data):
        _, rep = train_scg(init_model(seed=2), *data, TrainConfig(seed=2))
        assert rep.best_epoch == int(np.argmin(rep.val_ce))
        assert rep.best_val_ce == min(rep.val_ce)
        assert rep.stop_reason in {"patience", "max_epochs", "min_grad"}

    def test_returned_weights_reproduce_best_val(self, data):
        xt, yt, xv, yv = data
        model, rep = train_scg(init_model(seed=2), xt, yt, xv, yv, TrainConfig(seed=2))
        probs = forward(model, xv)
        ce = np.mean([cross_entropy(p, t) for p, t in zip(probs, yv)])
        assert ce == pytest.approx(rep.best_val_ce, rel=1e-9)

    def test_patience(self, data):
        _, rep = train_scg(init_model(seed=3), *data, TrainConfig(seed=3, patience=2, max_epochs=200))
        if rep.stop_reason == "patience":
            tail = rep.val_ce[rep.best_epoch + 1:]
            assert sum(v > rep.best_val_ce for v in tail) == 2

    def test_deterministic(self, data):
        m1, r1 = train_scg(init_model(seed=5), *data, TrainConfig(seed=5))
        m2, r2 = train_scg(init_model(seed=5), *data, TrainConfig(seed=5))
        assert np.array_equal(m1.flat(), m2.flat()) and r1 == r2

    def test_single_class_rejected(self, data):
        with pytest.raises(ValueError):
            train_scg(init_model(), data[0][:5], [TrickClass.OLLIE] * 5)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss(self, data):
        bad = MlpModel(np.full((28, 82), 1e308), np.zeros(28), np.full((5, 28), 1e308), np.zeros(5))
        with pytest.raises(NumericError):
            train_scg(bad, *data, TrainConfig())


def test_model_json_round_trip(tmp_path):
    m = init_model(seed=8, trained_axis="Z")
    assert np.array_equal(model_from_json(model_to_json(m)).flat(), m.flat())
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back.trained_axis == "Z" and back.input_scale == 16000.0 and back.seed == 8
    assert np.array_equal(forward(back, np.ones(82)), forward(m, np.ones(82)))
