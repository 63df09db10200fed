"""
Finding tricks in a continuous stream
=====================================

Signals from several tricks are glued into one long recording with some
small bumps in between. The detector starts an event when a sample leaves
the rolling-median baseline by 5,000 mg and keeps it when something within
the next 90 samples goes past 10,000 mg.
"""

import numpy as np

from skatetrick.core import Axis, TrickClass
from skatetrick.segmenter import DetectorConfig, StreamingDetector, detect_events
from skatetrick.synthgen import RngStream, generate_sample, load_library

library = load_library()
rng = RngStream(3)
parts, truth = [], []
for k, label in enumerate([TrickClass.FLIP, TrickClass.OLLIE, TrickClass.NSHOV]):
    z = generate_sample(library, label, rng.child(k)).signal(Axis.Z).samples
    truth.append(sum(len(p) for p in parts) + 42)  # pops are centred near sample 42
    parts.append(z)
    bump = np.zeros(200)
    # a kerb knock: crosses the start threshold only. It sits well before the
    # next pop; a knock within 90 samples of a trick would open the trick's event.
    bump[10:16] = 6500
    parts.append(bump)
stream = np.concatenate(parts)

cfg = DetectorConfig()
for ev in detect_events(stream, cfg, axis="Z"):
    kind = "trick" if ev.is_interest else "bump "
    print(kind, "at", ev.start_index, "baseline %.0f" % ev.baseline)
print("planted pops near", truth)

# the streaming detector sees the data in 10-sample packets and agrees with the batch scan
det = StreamingDetector(cfg, "Z")
live = []
for i in range(0, stream.size, 10):
    live += det.push(stream[i:i + 10])
live += det.flush()
print("streaming == batch:", [e.start_index for e in live] == [e.start_index for e in detect_events(stream, cfg)])
