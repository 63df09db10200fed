"""
Training the networks and fusing their votes
============================================

An 82-28-5 network is trained per axis with scaled conjugate gradient,
stopping once the validation cross-entropy has not improved for six
epochs. A fourth network sees the windows of all axes pooled together.
The three per-axis networks then vote.
"""

import numpy as np

from skatetrick.evaluation import training_curves_csv
from skatetrick.pipeline import run_pipeline

res = run_pipeline(seed=4)

for name in ("X", "Y", "Z", "XYZ"):
    rep = res.reports[name]
    print("ANN %-3s  acc %5.1f%%  best val CE %.5f at epoch %2d  (%s after %d epochs)" % (
        name, res.accuracy(name), rep.best_val_ce, rep.best_epoch, rep.stop_reason, rep.epochs))
print("fusion   acc %5.1f%%" % res.accuracy("fusion"))
print("xcorr    acc %5.1f%%" % res.accuracy("xcorr"))

print()
print("ANN Z confusion (rows true, columns predicted)")
print(res.confusions["Z"].to_csv())

# the curve CSV is ready for any plotting tool
curves = training_curves_csv(res.reports["Z"]).splitlines()
print("\n".join(curves[:4]), "\n...\n" + curves[-1])

val = np.array(res.reports["Z"].val_ce)
print("validation minimum is the kept epoch:", int(val.argmin()) == res.reports["Z"].best_epoch)
