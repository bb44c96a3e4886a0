"""Timing of a narrow 128x24x24 layer: compute per IB band vs DRAM refill.

Run: python3 demos/little_band_timing.py
"""

from convdk.cost import dram_overlap_check, ib_fill_seconds, ib_passes, simulate_layer
from convdk.mapping import LayerSpec, MacroConfig, plan_convdk

macro = MacroConfig()
layer = LayerSpec("128x24x24", 128, 24, 24, 3, 3, 1, 0)

# %% The LITTLE scheduler packs two channels per tile.
plan = plan_convdk(layer, macro)
print("scheduler=%s N=%d N_ch=%d tiles=%d" % (plan.scheduler.value, plan.N, plan.N_ch,
                                             len({ta.tile for ta in plan.tile_assignments})))

# %% Each IB band covers a few output rows; compute hides the next refill.
for i, band in enumerate(ib_passes(plan, macro)[:3]):
    ns = band.compute_clocks / macro.clock_hz * 1e9
    print("band %d: %d steps, %d new bytes, compute %.0f ns" % (i, band.n_steps, band.new_bytes, ns))
print("full IB fill %.0f ns, overlap=%s" % (ib_fill_seconds(macro) * 1e9, dram_overlap_check(plan, macro)))

# %% A slower DRAM no longer hides behind compute and stalls show up.
slow = MacroConfig(dram_bw_bytes_per_s=1e9)
r = simulate_layer(layer, plan_convdk(layer, slow), slow)
print("at 1 GB/s: overlap=%s, stall cycles=%d" % (r.dram_overlap, r.latency.dram_stall_cycles))
