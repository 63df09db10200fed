"""
Synthesising trick signatures
=============================

Every trick is three accelerometer axes, each built from a handful of
triangles (take-off pop, board rotation, landing), smoothed with a short
causal moving average and then covered in sensor noise.
"""

import numpy as np

from skatetrick.core import AXES, CLASSES, Axis, TrickClass, class_counts, validate
from skatetrick.synthgen import DEFAULT_COUNTS, RngStream, generate_dataset, load_library, synthesize

library = load_library()  # bundled signature library, one entry per (class, axis)

# one Z-axis ollie, with and without noise, from the same stream
model = library[(TrickClass.OLLIE, Axis.Z)]
clean = synthesize(model, RngStream(42), noise=False)
noisy = synthesize(model, RngStream(42), noise=True)
print("ollie Z: peak %.0f mg, noise sd %.0f mg" % (np.abs(clean).max(), np.std(noisy - clean)))

# the full corpus: 181 tricks, 543 signals
ds = generate_dataset(library, DEFAULT_COUNTS, seed=42)
print(len(ds), "samples,", ds.n_signals, "signals")
for c, n in class_counts(ds).items():
    print("  %d:%-6s %3d  stance=%s" % (c.value, c.name, n, ds.of_class(c)[0].stance.value))
print("violations:", validate(ds))

# the same seed always gives the same data; a sample only depends on its position
again = generate_dataset(library, DEFAULT_COUNTS, seed=42)
print("reproducible:", again == ds)

# crude ASCII look at one sample of each class on Z
for c in CLASSES:
    z = ds.of_class(c)[0].signal(Axis.Z).samples[30:110:2]
    print("%-6s" % c.name, "".join(" .:-=+*#%@"[min(9, int(abs(v) / 2000))] for v in z))
