"""
Template matching by cross-correlation
======================================

For each class and axis the sample whose window correlates best on average
with its classmates becomes the Target. New tricks are scored against all
Targets, with the Z axis counted twice.
"""

import numpy as np

from skatetrick.core import CLASSES, Axis
from skatetrick.pipeline import split_ids, windows_by_sample
from skatetrick.segmenter import segment_dataset
from skatetrick.synthgen import DEFAULT_COUNTS, generate_dataset, load_library
from skatetrick.xcorr import correlation_table, select_targets, xcorr_classify

ds = generate_dataset(load_library(), DEFAULT_COUNTS, seed=9)
wins, labels = windows_by_sample(segment_dataset(ds))

targets = select_targets(ds, wins)
table = correlation_table(ds, wins, targets, Axis.Z)
print("Z-axis mean correlation (rows: Target, columns: class)")
print("       " + " ".join("%6s" % c.name for c in CLASSES))
for c, row in zip(CLASSES, table):
    print("%-6s " % c.name + " ".join("%6.3f" % v for v in row))

# hold out a fifth of the tricks and classify them with Targets from the rest
train_ids, val_ids = split_ids(labels, 0.2, seed=1)
held_targets = select_targets(ds.subset(train_ids), wins)
hits = sum(xcorr_classify(wins[i], held_targets)[0] == labels[i] for i in val_ids)
print("held-out accuracy: %d/%d" % (hits, len(val_ids)))
