"""Walk through the shift schedule of a 1D duplicated-kernel convolution.

Run: python3 demos/schedule_walkthrough.py
"""

import numpy as np

from convdk.engine import conv1d_convdk, reference_conv1d
from convdk.schedule import KernelGeometry, check_conditions, full_schedule

# %% A 3-tap kernel with stride 2 duplicated 30 times down the tile memory.
g = KernelGeometry(3, 2)
print(check_conditions(g).describe())
print("lcm=%d, shift positions l=%d" % (g.lcm, g.l))

# %% Each shift a enables one block set n and produces one output set m.
sched = full_schedule(g, 30)
for a, steps in sorted(sched.by_shift().items()):
    ns = [n for n, _ in steps]
    ms = [m for _, m in steps]
    print("a=%d  n=%s..%s  m=%s..%s  (%d outputs)" % (a, ns[:3], ns[-1], ms[:3], ms[-1], len(ms)))
print("total outputs:", sched.n_outputs)

# %% Three shifts reproduce the direct convolution exactly.
rng = np.random.default_rng(0)
x = rng.integers(-128, 128, sched.input_width)
k = rng.integers(-128, 128, 3)
assert np.array_equal(conv1d_convdk(x, k, 2, 30), reference_conv1d(x, k, 2))
print("matches the direct convolution on %d inputs" % sched.input_width)

# %% A stride sharing a factor with the kernel width has no complete schedule.
print(check_conditions(KernelGeometry(9, 3)).describe())
