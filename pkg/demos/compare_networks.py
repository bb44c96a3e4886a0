"""Four-way dataflow comparison on the builtin networks.

Run: python3 demos/compare_networks.py [model ...]
"""

import sys

from convdk.mapping import Dataflow
from convdk.report import compare
from convdk.workload import BUILTIN, get_model

names = sys.argv[1:] or list(BUILTIN)
table = compare([get_model(n) for n in names])

# %% Reductions of the duplicated-kernel dataflows against their baselines.
print("%-20s %7s %9s %9s %9s %11s" % ("model", "util%", "buffer-%", "energy-%", "latency-%", "IS energy-%"))
for name in sorted(names):
    ws = table.get(name, Dataflow.WS_CONVDK)
    is_base = table.get(name, Dataflow.IS_BASELINE)["energy"]
    is_dk = table.get(name, Dataflow.IS_CONVDK)["energy"]
    print("%-20s %7.2f %9.1f %9.1f %9.1f %11.1f" % (
        name, 100 * ws["utilization"], 100 * (1 - ws["buffer_traffic"]),
        100 * (1 - ws["energy"]), 100 * (1 - ws["latency"]), 100 * (1 - is_dk / is_base)))

# %% DRAM traffic barely moves: the gains come from on-chip reuse.
for name in sorted(names):
    print(name, ["%.3f" % table.get(name, df)["dram_traffic"] for df in Dataflow])
