import json

import numpy as np
import pytest

from skatetrick.core import CLASSES, TrickClass
from skatetrick.evaluation import (
    BenchmarkError,
    benchmark,
    confusion,
    export_training_curves,
    read_training_curves,
    training_curves_csv,
)
from skatetrick.mlp import TrainReport


class TestConfusion:
    def test_perfect(self):
        truth = [c for c in CLASSES for _ in range(3)]
        cm = confusion(truth, truth)
        assert np.array_equal(cm.counts, 3 * np.eye(5, dtype=int)) and cm.accuracy == 100.0

    def test_nine_of_ten(self):
        truth = [TrickClass.OLLIE] * 10
        pred = [TrickClass.OLLIE] * 9 + [TrickClass.SHOV]
        cm = confusion(truth, pred)
        assert cm.accuracy == pytest.approx(90.0) and cm.error == pytest.approx(10.0)
        assert cm.counts[TrickClass.OLLIE.idx, TrickClass.SHOV.idx] == 1

    def test_tally_oracle(self, rng):
        truth = [CLASSES[i] for i in rng.integers(0, 5, 200)]
        pred = [CLASSES[i] for i in rng.integers(0, 5, 200)]
        cm = confusion(truth, pred)
        for i, ti in enumerate(CLASSES):
            for j, pj in enumerate(CLASSES):
                assert cm.counts[i, j] == sum(1 for t, p in zip(truth, pred) if t == ti and p == pj)
        off = cm.counts.sum() - np.trace(cm.counts)
        assert cm.accuracy == 100.0 * (1 - off / cm.total)
        assert cm.accuracy + cm.error == pytest.approx(100.0)
        assert cm.percentages().sum() == pytest.approx(100.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            confusion([TrickClass.OLLIE], [])
        with pytest.raises(ValueError):
            confusion([], [])

    def test_renderings(self):
        cm = confusion([TrickClass.FLIP, TrickClass.FLIP], [TrickClass.FLIP, TrickClass.NOLLIE])
        lines = cm.to_csv().splitlines()
        assert lines[0].startswith("true\\pred,1:NOLLIE") and lines[-2] == "accuracy_pct,50.0000"
        assert "3:FLIP,50.0000,0.0000,50.0000" in cm.to_csv(percent=True)
        assert json.loads(json.dumps(cm.to_dict()))["total"] == 2


class TestBenchmark:
    def test_no_op(self):
        rep = benchmark(lambda x: None, [], repetitions=20)
        # a Python call costs well under a millisecond; only overhead is measured
        assert 0 <= rep.min_s <= rep.median_s <= rep.max_s < 1e-3
        assert rep.repetitions == 20 and rep.threads == 1

    def test_min_repetitions(self):
        with pytest.raises(ValueError):
            benchmark(lambda x: None, [], repetitions=4)

    def test_classifier_failure(self):
        calls = []

        def flaky(x):
            calls.append(1)
            if len(calls) == 3:
                raise RuntimeError("boom")

        with pytest.raises(BenchmarkError, match="after 1 timed runs"):
            benchmark(flaky, [1, 2], repetitions=5)

    def test_warm_up_not_timed(self):
        calls = []
        rep = benchmark(lambda x: calls.append(x), "abc", repetitions=6, n_inputs=3)
        assert len(calls) == 7 and rep.n_inputs == 3

    def test_cost_grows_with_work(self):
        small = benchmark(lambda n: sum(range(n)), 1000, repetitions=9, n_inputs=1)
        large = benchmark(lambda n: sum(range(n)), 200000, repetitions=9, n_inputs=1)
        assert large.median_s > small.median_s

    def test_json(self):
        doc = json.loads(benchmark(lambda x: x, [0], repetitions=5, name="id").to_json())
        assert doc["schema_version"] == 1 and doc["classifier"] == "id"


class TestCurves:
    def test_one_epoch(self):
        rep = TrainReport([0.5], [0.6], 0, 0.6, "max_epochs")
        rows = training_curves_csv(rep).splitlines()
        assert rows == ["epoch,train_ce,val_ce", "0,0.5,0.6", "best,0,0.6"]

    def test_round_trip(self, tmp_path):
        val = [1.0, 0.7, 0.4, 0.45, 0.5]
        rep = TrainReport([1.1, 0.8, 0.5, 0.3, 0.2], val, int(np.argmin(val)), min(val), "patience")
        export_training_curves(rep, tmp_path / "c.csv")
        back = read_training_curves(tmp_path / "c.csv")
        assert back.train_ce == rep.train_ce and back.val_ce == rep.val_ce
        assert back.best_epoch == int(np.argmin(back.val_ce)) == 2

    def test_empty(self):
        with pytest.raises(ValueError):
            training_curves_csv(TrainReport())
