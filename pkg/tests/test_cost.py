import json

import pytest
from hypothesis import given, settings, strategies as st

from convdk.baselines import plan_is_baseline, plan_layer, plan_ws_baseline
from convdk.cost import (TRAFFIC_FIELDS, EnergyModel, LatencyBreakdown, TrafficLedger,
                         compute_seconds, dram_overlap_check, energy_total, ib_fill_seconds,
                         ib_passes, latency_rules, simulate_layer, tm_write_cycles)
from convdk.errors import CapacityError, ValidationError
from convdk.mapping import Dataflow, LayerSpec, MacroConfig, plan_big, plan_convdk

MACRO = MacroConfig()
ONE_TILE = MacroConfig(n_tiles=1)
TINY = LayerSpec("tiny", 1, 5, 5, 3, 3, 1, 0)
LITTLE_128 = LayerSpec("little128", 128, 24, 24, 3, 3, 1, 0)


class TestRules:
    def test_duplicated_kernel_write(self):
        assert tm_write_cycles(3, 3, 20) == 18
        assert tm_write_cycles(3, 3, 2) == 18

    def test_single_kernel_write(self):
        assert tm_write_cycles(3, 3, 1) == 9

    def test_full_tm_of_copies(self):
        plan = plan_big(LayerSpec("w", 1, 112, 112, 3, 3, 1, 0), MacroConfig(n_tiles=1))
        assert plan.N * 9 <= 180 and plan.N == 19
        assert latency_rules(plan, MacroConfig(n_tiles=1)).tm_write_cycles == 18

    def test_ib_fill(self):
        assert ib_fill_seconds(MACRO) * 1e9 == pytest.approx(625.0)

    def test_compute_seconds(self):
        assert compute_seconds(44 * 3, MACRO) * 1e9 == pytest.approx(5280.0)


class TestHandCount:
    """1-channel 5x5 ifmap, 3x3 kernel, stride 1, one tile: every bit by hand."""

    def test_ws_convdk(self):
        plan = plan_convdk(TINY, ONE_TILE)
        assert plan.N == 1 and len(plan.tile_assignments) == 1
        r = simulate_layer(TINY, plan, ONE_TILE)
        t = r.traffic
        assert t.wb_to_tm_bits == 9 * 8
        # first row slab is 3 rows x 5 columns, later rows bring one new row each
        assert t.ib_to_trf_bits == (15 + 5 + 5) * 8
        assert t.acc_to_ob_bits == t.ob_to_dram_bits == 9 * 8
        assert t.dram_to_ib_bits == 25 * 8 and t.dram_to_wb_bits == 72
        assert t.ib_to_tm_bits == t.wb_to_trf_bits == 0
        lat = r.latency
        assert (lat.tm_write_cycles, lat.trf_load_cycles, lat.compute_cycles, lat.ob_write_cycles) == (9, 3, 90, 9)
        assert lat.dram_stall_cycles == 0 and lat.total_cycles == 111

    def test_ws_convdk_without_row_reuse(self):
        macro = MacroConfig(n_tiles=1, row_reuse=False)
        r = simulate_layer(TINY, plan_convdk(TINY, macro), macro)
        assert r.traffic.ib_to_trf_bits == 3 * 15 * 8

    def test_ws_baseline(self):
        r = simulate_layer(TINY, plan_ws_baseline(TINY, ONE_TILE), ONE_TILE)
        assert r.traffic.ib_to_trf_bits == 9 * 9 * 8
        assert r.traffic.wb_to_tm_bits == 72
        assert (r.latency.trf_load_cycles, r.latency.tm_write_cycles) == (9, 9)

    def test_ws_baseline_padding_is_free(self):
        L = LayerSpec("p", 1, 3, 3, 3, 3, 1, 1)
        r = simulate_layer(L, plan_ws_baseline(L, ONE_TILE), ONE_TILE)
        # real IAs seen by the nine windows: 4+6+4 / 6+9+6 / 4+6+4
        assert r.traffic.ib_to_trf_bits == 49 * 8
        assert r.traffic.dram_to_ib_bits == 9 * 8

    def test_is_baseline(self):
        r = simulate_layer(TINY, plan_is_baseline(TINY, ONE_TILE), ONE_TILE)
        t = r.traffic
        assert t.ib_to_tm_bits == 3 * 15 * 8
        assert t.wb_to_trf_bits == 9 * 72
        assert (r.latency.tm_write_cycles, r.latency.trf_load_cycles) == (45, 9)

    def test_is_convdk(self):
        r = simulate_layer(TINY, plan_layer(TINY, ONE_TILE, Dataflow.IS_CONVDK), ONE_TILE)
        t = r.traffic
        assert t.ib_to_tm_bits == 25 * 8 and t.wb_to_trf_bits == 72
        assert (r.latency.tm_write_cycles, r.latency.trf_load_cycles) == (25, 1)

    def test_energy_dot_product(self):
        r = simulate_layer(TINY, plan_convdk(TINY, ONE_TILE), ONE_TILE)
        e = r.energy
        assert e.dram_pj == pytest.approx((200 + 72 + 72) * 20)
        assert e.buffer_pj == pytest.approx((200 + 72 + 72) * 1.139)
        assert e.tm_write_pj == pytest.approx(72 * 0.017)
        assert e.trf_write_pj == pytest.approx(200 * 0.028)
        assert e.total_pj == pytest.approx(e.dram_pj + e.buffer_pj + e.tm_write_pj + e.trf_write_pj)


class TestLittleTiming:
    def test_ib_band(self):
        plan = plan_convdk(LITTLE_128, MACRO)
        bands = ib_passes(plan, MACRO)
        first = bands[0]
        # 5 input rows of 128 x 24 bytes yield 3 output rows of 2 x 22 outputs per tile
        assert first.new_bytes == 5 * 128 * 24 == 15360
        assert first.n_steps == 3
        assert first.compute_clocks == 44 * 3 * 10 == 1320
        assert first.compute_clocks / MACRO.clock_hz * 1e9 == pytest.approx(5280.0)

    def test_compute_cycles_per_layer(self):
        r = latency_rules(plan_convdk(LITTLE_128, MACRO), MACRO)
        assert r.compute_cycles == 2 * 22 * 22 * 10

    def test_overlap(self):
        plan = plan_convdk(LITTLE_128, MACRO)
        assert dram_overlap_check(plan, MACRO)
        assert latency_rules(plan, MACRO).dram_stall_cycles == 0

    def test_slow_dram_stalls(self):
        slow = MacroConfig(dram_bw_bytes_per_s=1e9)
        plan = plan_convdk(LITTLE_128, slow)
        assert not dram_overlap_check(plan, slow)
        assert latency_rules(plan, slow).dram_stall_cycles > 0

    def test_ib_too_small(self):
        small = MacroConfig(ib_bytes=8)
        with pytest.raises(CapacityError):
            simulate_layer(TINY, plan_convdk(TINY, small), small)


class TestEmpty:
    def test_zero_channels(self):
        L = LayerSpec("empty", 0, 8, 8, 3, 3, 1, 1)
        for df in Dataflow:
            r = simulate_layer(L, plan_layer(L, MACRO, df), MACRO)
            assert all(v == 0 for v in r.traffic.to_dict().values() if v) or r.traffic.dram_bits == 0
            assert r.latency.total_cycles == 0 and r.energy.total_pj == 0
            assert r.dram_overlap

    def test_empty_ledger(self):
        assert energy_total(TrafficLedger()).total_pj == 0

    def test_dram_only(self):
        e = energy_total(TrafficLedger(dram_to_ib_bits=2 ** 20))
        assert e.total_pj == 20 * 2 ** 20


ledgers = st.builds(TrafficLedger, *[st.integers(0, 10 ** 9)] * len(TRAFFIC_FIELDS))


class TestEnergy:
    @given(ledgers)
    def test_linear(self, t):
        e1, e2 = energy_total(t), energy_total(t.scaled(2))
        for k, v in e1.to_dict().items():
            assert e2.to_dict()[k] == pytest.approx(2 * v)

    @given(ledgers, ledgers)
    def test_additive(self, a, b):
        assert energy_total(a + b).total_pj == pytest.approx(energy_total(a).total_pj + energy_total(b).total_pj)

    def test_overrides(self):
        m = EnergyModel.from_dict({"dram_pj_per_bit": 10.0})
        assert energy_total(TrafficLedger(dram_to_ib_bits=8), m).dram_pj == 80
        with pytest.raises(ValidationError):
            EnergyModel(dram_pj_per_bit=0)
        with pytest.raises(ValidationError):
            EnergyModel.from_dict({"sram": 1.0})

    def test_negative_ledger(self):
        with pytest.raises(ValueError):
            TrafficLedger(dram_to_ib_bits=-1)


class TestLatency:
    @given(*[st.integers(0, 10 ** 7)] * 5)
    def test_total_is_sum(self, a, b, c, d, e):
        lat = LatencyBreakdown(a, b, c, d, e)
        assert lat.total_cycles == a + b + c + d + e
        assert lat.total_seconds == lat.total_cycles / lat.clock_hz

    def test_no_duplication_no_extra_writes(self):
        L = LayerSpec("n1", 1, 5, 5, 3, 3, 1, 0)
        assert latency_rules(plan_convdk(L, ONE_TILE), ONE_TILE).tm_write_cycles == 9


@st.composite
def small_layers(draw):
    k, s = draw(st.sampled_from([(3, 1), (3, 2), (5, 1), (5, 2), (7, 3)]))
    pad = draw(st.integers(0, k // 2))
    lo = max(1, k - 2 * pad)
    return LayerSpec("r", draw(st.integers(1, 100)), draw(st.integers(lo, 64)),
                     draw(st.integers(lo, 64)), k, k, s, pad)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(small_layers())
    def test_convdk_never_loads_more_ias(self, L):
        ws = simulate_layer(L, plan_ws_baseline(L, MACRO), MACRO).traffic
        dk = simulate_layer(L, plan_convdk(L, MACRO), MACRO).traffic
        assert dk.ib_to_trf_bits <= ws.ib_to_trf_bits

    @settings(max_examples=40, deadline=None)
    @given(small_layers(), st.sampled_from(list(Dataflow)))
    def test_every_fetched_ia_reaches_a_tile(self, L, df):
        t = simulate_layer(L, plan_layer(L, MACRO, df), MACRO).traffic
        assert t.ib_to_trf_bits + t.ib_to_tm_bits >= t.dram_to_ib_bits

    @settings(max_examples=30, deadline=None)
    @given(small_layers())
    def test_dram_traffic_independent_of_dataflow(self, L):
        bits = {df: simulate_layer(L, plan_layer(L, MACRO, df), MACRO).traffic.dram_bits for df in Dataflow}
        assert bits[Dataflow.WS_CONVDK] == bits[Dataflow.IS_CONVDK] == bits[Dataflow.WS_BASELINE]
        # IS slabs split across passes re-fetch their halo columns
        assert bits[Dataflow.IS_BASELINE] >= bits[Dataflow.WS_BASELINE]

    @settings(max_examples=30, deadline=None)
    @given(small_layers(), st.sampled_from(list(Dataflow)))
    def test_outputs_counted_once(self, L, df):
        r = simulate_layer(L, plan_layer(L, MACRO, df), MACRO)
        assert r.traffic.acc_to_ob_bits == L.n_outputs * 8
        assert r.latency.compute_cycles >= 10 * -(-L.n_outputs // MACRO.n_tiles)

    @settings(max_examples=20, deadline=None)
    @given(small_layers())
    def test_deterministic(self, L):
        a = simulate_layer(L, plan_convdk(L, MACRO), MACRO)
        assert a == simulate_layer(L, plan_convdk(L, MACRO), MACRO)


class TestSerialization:
    def test_json_and_csv_agree(self):
        r = simulate_layer(TINY, plan_convdk(TINY, ONE_TILE), ONE_TILE)
        d = json.loads(json.dumps(r.to_dict()))
        row = r.csv_row()
        assert d["traffic"]["ib_to_trf_bits"] == row["ib_to_trf_bits"]
        assert d["latency"]["total_cycles"] == row["total_cycles"]
        assert d["energy"]["total_pj"] == row["total_pj"]

    def test_plan_for_other_layer(self):
        with pytest.raises(ValueError):
            simulate_layer(LITTLE_128, plan_convdk(TINY, ONE_TILE), ONE_TILE)
