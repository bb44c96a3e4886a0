"""Acceptance criteria 1-7, one PASS/FAIL line per criterion on stdout."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from convdk.baselines import plan_layer
from convdk.cost import (dram_overlap_check, ib_fill_seconds, ib_passes, latency_rules,
                         tm_write_cycles)
from convdk.engine import execute_plan, reference_dwconv
from convdk.mapping import Dataflow, LayerSpec, MacroConfig, plan_big, plan_convdk
from convdk.report import ComparisonTable, run_network
from convdk.schedule import KernelGeometry, check_conditions, full_schedule, verify_partition
from convdk.verify import ORACLE_GEOMETRIES, random_layer, random_operands
from convdk.workload import get_model

GOLDEN = Path(__file__).parent / "golden" / "schedule_k3_s2_n30.json"
MACRO = MacroConfig()
MODELS = ("mobilenet_v1", "mobilenet_v2", "mobilenet_v3_large", "mobilenet_v3_small",
          "efficientnet_b0")
UTIL_TARGET = dict(zip(MODELS, (86.15, 86.76, 84.00, 86.97, 85.94)))


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print("\nACCEPTANCE %s: %s  %s" % (label, "PASS" if ok else "FAIL", detail))
        assert ok, detail
    return emit


def test_1_partition_grid(report):
    t0 = time.perf_counter()
    bad = []
    n_ok = 0
    for k in (3, 5, 7, 9, 11):
        for s in range(1, k):
            g = KernelGeometry(k, s)
            rep = check_conditions(g)
            if rep.cond2 != (math.gcd(k, s) == 1):
                bad.append(("cond2", k, s))
            if rep.ok:
                n_ok += 1
                if not verify_partition(g, 10 * g.lcm):
                    bad.append(("partition", k, s))
    if check_conditions(KernelGeometry(9, 3)).cond2:
        bad.append(("cond2", 9, 3))
    dt = time.perf_counter() - t0
    report("1", not bad and dt < 1.0, "%d schedulable geometries, %d mismatches, %.3f s"
           % (n_ok, len(bad), dt))


def test_2_worked_example(report):
    golden = json.loads(GOLDEN.read_text())
    by_a = full_schedule(KernelGeometry(golden["k"], golden["s"]), golden["N"]).by_shift()
    got = {"a%d" % a: {"n": [n for n, _ in v], "m": [m for _, m in v]} for a, v in by_a.items()}
    want = {key: golden[key] for key in ("a0", "a1", "a2")}
    report("2", got == want, "k=3 s=2 N=30 sequences %s golden file"
           % ("match" if got == want else "differ from"))


def test_3_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    n, mismatches = 1000, 0
    for i in range(n):
        k, s = ORACLE_GEOMETRIES[i % len(ORACLE_GEOMETRIES)]
        layer = random_layer(rng, k, s, max_c=8, max_hw=32)
        x, w = random_operands(rng, layer)
        got = execute_plan(plan_convdk(layer, MACRO), x, w)
        mismatches += not np.array_equal(got, reference_dwconv(x, w, s, layer.padding))
    dt = time.perf_counter() - t0
    report("3", mismatches == 0 and dt < 30.0, "%d instances, %d mismatches, %.1f s"
           % (n, mismatches, dt))


def test_4_timing_128x24x24(report):
    layer = LayerSpec("128x24x24", 128, 24, 24, 3, 3, 1, 0)
    plan = plan_convdk(layer, MACRO)
    band = ib_passes(plan, MACRO)[0]
    compute_ns = band.compute_clocks / MACRO.clock_hz * 1e9
    fill_ns = ib_fill_seconds(MACRO) * 1e9
    overlap = dram_overlap_check(plan, MACRO)
    ok = (plan.N_ch == 2 and band.compute_clocks == 44 * 3 * 10
          and round(compute_ns) == 5280 and round(fill_ns) == 625 and overlap)
    report("4", ok, "N_ch=%d, band compute %d clocks = %.1f ns, IB fill %.1f ns, overlap=%s"
           % (plan.N_ch, band.compute_clocks, compute_ns, fill_ns, overlap))


def test_5_duplication_write(report):
    per_n = {N: tm_write_cycles(3, 3, N) for N in range(2, 21)}
    plan = plan_big(LayerSpec("3x3", 1, 112, 112, 3, 3, 1, 0), MacroConfig(n_tiles=1))
    full = latency_rules(plan, MacroConfig(n_tiles=1)).tm_write_cycles
    ok = set(per_n.values()) == {18} and full == 18
    report("5", ok, "N=2..20 -> %s cycles; N=%d (%d TM rows) -> %d cycles"
           % (sorted(set(per_n.values())), plan.N, plan.N * 9, full))


@pytest.fixture(scope="module")
def networks():
    t0 = time.perf_counter()
    runs = {(m, df): run_network(get_model(m), df, MACRO) for m in MODELS for df in Dataflow}
    table = ComparisonTable.build(list(runs.values()))
    return runs, table, time.perf_counter() - t0


def _reduction(table, model, df, col):
    return 100 * (1 - table.get(model, df)[col])


def _band(values, lo, hi):
    bad = {m: v for m, v in values.items() if not lo <= v <= hi}
    text = ", ".join("%s %.1f" % (m, v) for m, v in values.items())
    return not bad, "%s (band %.1f-%.1f)" % (text, lo, hi)


def test_6a_utilization(report, networks):
    runs, table, dt = networks
    util = {m: 100 * table.get(m, Dataflow.WS_CONVDK)["utilization"] for m in MODELS}
    bad = {m: u for m, u in util.items() if abs(u - UTIL_TARGET[m]) > 3.0}
    text = ", ".join("%s %.2f (target %.2f)" % (m, util[m], UTIL_TARGET[m]) for m in MODELS)
    report("6a", not bad and dt < 60, "%s; %.1f s" % (text, dt))


def test_6b_buffer_traffic(report, networks):
    _, table, _ = networks
    red = {m: _reduction(table, m, Dataflow.WS_CONVDK, "buffer_traffic") for m in MODELS}
    report("6b", *_band(red, 77.4 - 5, 87.0 + 5))


def test_6c_energy_and_latency(report, networks):
    _, table, _ = networks
    e = {m: _reduction(table, m, Dataflow.WS_CONVDK, "energy") for m in MODELS}
    lat = {m: _reduction(table, m, Dataflow.WS_CONVDK, "latency") for m in MODELS}
    ok_e, text_e = _band(e, 10.1 - 3, 17.9 + 3)
    ok_l, text_l = _band(lat, 15.6 - 3, 27.8 + 3)
    report("6c", ok_e and ok_l, "energy: %s; latency: %s" % (text_e, text_l))


def test_6d_is_energy(report, networks):
    _, table, _ = networks
    red = {}
    for m in MODELS:
        base = table.get(m, Dataflow.IS_BASELINE)["energy"]
        red[m] = 100 * (1 - table.get(m, Dataflow.IS_CONVDK)["energy"] / base)
    report("6d", *_band(red, 12.8 - 3, 20.3 + 3))


def test_7_structural(report, networks):
    runs, _, _ = networks
    problems = []
    for m in MODELS:
        dram = [runs[m, df].total.traffic.dram_bits for df in Dataflow]
        if max(dram) > 1.01 * min(dram):
            problems.append("%s dram spread %.4f" % (m, max(dram) / min(dram)))
        layers = zip(*(runs[m, df].layers for df in Dataflow))
        for reps in layers:
            r = dict(zip(Dataflow, reps))
            name = r[Dataflow.WS_CONVDK].layer
            if r[Dataflow.WS_CONVDK].traffic.ib_to_trf_bits > r[Dataflow.WS_BASELINE].traffic.ib_to_trf_bits:
                problems.append("%s ib_to_trf" % name)
            u = [r[df].utilization for df in (Dataflow.WS_CONVDK, Dataflow.IS_BASELINE, Dataflow.WS_BASELINE)]
            if not u[0] >= u[1] >= u[2]:
                problems.append("%s utilization order %s" % (name, ["%.3f" % v for v in u]))
    n_layers = sum(len(runs[m, Dataflow.WS_CONVDK].layers) for m in MODELS)
    report("7", not problems, "%d layers checked, %d violations%s"
           % (n_layers, len(problems), (": " + "; ".join(problems[:5])) if problems else ""))
