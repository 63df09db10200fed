"""
How fast are the two classifiers?
=================================

The correlation classifier does 15 full-lag correlations per trick, while
the network is two small matrix products for the whole batch. Everything
runs on one BLAS thread and the first call is a discarded warm-up.
"""

import numpy as np

from skatetrick.core import AXES
from skatetrick.evaluation import benchmark
from skatetrick.mlp import forward
from skatetrick.pipeline import run_pipeline, windows_by_sample
from skatetrick.xcorr import xcorr_classify

res = run_pipeline(seed=0)
wins, _ = windows_by_sample(res.records)
ids = sorted(wins)

for n in (3, 6, 9):
    batch = [wins[i] for i in ids[: n // 3]]
    rep = benchmark(lambda b: [xcorr_classify(w, res.targets) for w in b], batch, 30, "xcorr", n)
    print("xcorr %2d signals: %.3f-%.3f ms (median %.3f)" % (n, rep.min_s * 1e3, rep.max_s * 1e3, rep.median_s * 1e3))

x = np.array([wins[i][a].values for i in ids for a in AXES][:15])
rep = benchmark(lambda b: forward(res.models["XYZ"], b).argmax(axis=1), x, 30, "ann", 15)
print("ANN   15 signals: %.3f-%.3f ms (median %.3f)" % (rep.min_s * 1e3, rep.max_s * 1e3, rep.median_s * 1e3))
print(rep.to_json())
