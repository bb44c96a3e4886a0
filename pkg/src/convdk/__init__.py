"""Duplicated-kernel depthwise convolution on a tiled CIM macro.

Shift schedules, a bit-exact functional engine, BIG/LITTLE mapping and a
traffic/latency/energy cost model with WS and IS baselines.
"""

from .baselines import DataflowId, plan_is_baseline, plan_is_convdk, plan_layer, plan_ws_baseline
from .cost import (CostReport, EnergyModel, EnergyReport, LatencyBreakdown, TrafficLedger,
                   aggregate, dram_overlap_check, energy_total, ib_fill_seconds, ib_passes,
                   latency_rules, simulate_layer, tm_write_cycles)
from .engine import (conv1d_convdk, dwconv_multichannel, dwconv_tile, enable_masks,
                     execute_plan, reference_conv1d, reference_dwconv)
from .errors import (AccumulatorOverflow, CapacityError, ConditionViolation, ConvDKError,
                     LengthMismatch, ParseError, ShapeMismatch, TooNarrow, ValidationError)
from .mapping import (Dataflow, LayerSpec, MacroConfig, MappingPlan, Scheduler, compute_tw,
                      cross_tile_copies, duplication_count, plan_big, plan_convdk, plan_little,
                      select_scheduler, utilization)
from .report import ComparisonTable, compare, run_network
from .schedule import (ConditionReport, KernelGeometry, ScheduleParams, ShiftSchedule,
                       check_conditions, find_m1_n1, full_schedule, index_sets, output_count,
                       verify_partition)
from .workload import NetworkSpec, builtin_models, get_model, load_network, save_network

__version__ = "0.1.0"
