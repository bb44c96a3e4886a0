"""Traffic, latency and energy accounting for a mapped layer.

Tiles run in lockstep: at every step each tile handles one work item (one
output row of its stream) and a phase takes as long as the slowest tile.
Per item the phases are

* TM write   - kernels (WS) or IA slab words (IS), one clock per word; a
               duplicated kernel costs one extra clock per distinct weight
               thanks to the multi-access write.
* TRF load   - one clock per fill from the buffer.
* compute    - one computation cycle (10 clocks) per output.
* OB write   - one clock per output word.

DRAM transfers run beside the tiles, band by band through the IB, and only
the part that outlasts the band's computation shows up as a stall.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .mapping import Dataflow, LayerSpec, MacroConfig, MappingPlan, utilization
from .errors import CapacityError, ValidationError

TRAFFIC_FIELDS = ("dram_to_ib_bits", "dram_to_wb_bits", "ob_to_dram_bits", "ib_to_trf_bits",
                  "wb_to_tm_bits", "ib_to_tm_bits", "wb_to_trf_bits", "acc_to_ob_bits")


@dataclass(frozen=True)
class TrafficLedger:
    dram_to_ib_bits: int = 0
    dram_to_wb_bits: int = 0
    ob_to_dram_bits: int = 0
    ib_to_trf_bits: int = 0
    wb_to_tm_bits: int = 0
    ib_to_tm_bits: int = 0
    wb_to_trf_bits: int = 0
    acc_to_ob_bits: int = 0

    def __post_init__(self):
        for f in TRAFFIC_FIELDS:
            if getattr(self, f) < 0:
                raise ValueError("%s is negative" % f)

    def __add__(self, other: "TrafficLedger") -> "TrafficLedger":
        return TrafficLedger(*(getattr(self, f) + getattr(other, f) for f in TRAFFIC_FIELDS))

    def scaled(self, factor: int) -> "TrafficLedger":
        return TrafficLedger(*(getattr(self, f) * factor for f in TRAFFIC_FIELDS))

    @property
    def dram_bits(self) -> int:
        return self.dram_to_ib_bits + self.dram_to_wb_bits + self.ob_to_dram_bits

    @property
    def buffer_bits(self) -> int:
        return (self.ib_to_trf_bits + self.wb_to_tm_bits + self.ib_to_tm_bits
                + self.wb_to_trf_bits + self.acc_to_ob_bits)

    @property
    def ia_bits(self) -> int:
        return self.ib_to_trf_bits + self.ib_to_tm_bits

    @property
    def weight_bits(self) -> int:
        return self.wb_to_tm_bits + self.wb_to_trf_bits

    @property
    def tm_write_bits(self) -> int:
        return self.wb_to_tm_bits + self.ib_to_tm_bits

    @property
    def trf_write_bits(self) -> int:
        return self.ib_to_trf_bits + self.wb_to_trf_bits

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LatencyBreakdown:
    compute_cycles: int = 0
    trf_load_cycles: int = 0
    tm_write_cycles: int = 0
    ob_write_cycles: int = 0
    dram_stall_cycles: int = 0
    clock_hz: float = 250e6

    @property
    def buffer_cycles(self) -> int:
        return self.trf_load_cycles + self.tm_write_cycles + self.ob_write_cycles

    @property
    def total_cycles(self) -> int:
        return self.compute_cycles + self.buffer_cycles + self.dram_stall_cycles

    @property
    def total_seconds(self) -> float:
        return self.total_cycles / self.clock_hz

    def __add__(self, other: "LatencyBreakdown") -> "LatencyBreakdown":
        return LatencyBreakdown(
            self.compute_cycles + other.compute_cycles,
            self.trf_load_cycles + other.trf_load_cycles,
            self.tm_write_cycles + other.tm_write_cycles,
            self.ob_write_cycles + other.ob_write_cycles,
            self.dram_stall_cycles + other.dram_stall_cycles,
            self.clock_hz)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(total_cycles=self.total_cycles, total_seconds=self.total_seconds)
        return d


@dataclass(frozen=True)
class EnergyModel:
    dram_pj_per_bit: float = 20.0
    buffer_pj_per_bit: float = 1.139
    tm_write_pj_per_bit: float = 0.017
    trf_write_pj_per_bit: float = 0.028

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValidationError("EnergyModel.%s must be positive" % f.name)

    @classmethod
    def from_dict(cls, data: dict) -> "EnergyModel":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError("unknown energy fields: %s" % ", ".join(sorted(unknown)))
        return cls(**data)


@dataclass(frozen=True)
class EnergyReport:
    dram_pj: float = 0.0
    buffer_pj: float = 0.0
    tm_write_pj: float = 0.0
    trf_write_pj: float = 0.0
    # buffer_pj split by what moves
    ia_pj: float = 0.0
    weight_pj: float = 0.0
    output_pj: float = 0.0

    @property
    def total_pj(self) -> float:
        return self.dram_pj + self.buffer_pj + self.tm_write_pj + self.trf_write_pj

    @property
    def on_chip_pj(self) -> float:
        return self.buffer_pj + self.tm_write_pj + self.trf_write_pj

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_pj"] = self.total_pj
        return d


def energy_total(ledger: TrafficLedger, model: EnergyModel = EnergyModel()) -> EnergyReport:
    """Energy of the data movement in ``ledger``.

    DRAM edges cost the DRAM rate; every buffer edge costs the SRAM-buffer
    rate (reads and writes alike), and bits landing in the TM or TRF add
    their write cost on top.
    """
    b = model.buffer_pj_per_bit
    return EnergyReport(
        dram_pj=ledger.dram_bits * model.dram_pj_per_bit,
        buffer_pj=ledger.buffer_bits * b,
        tm_write_pj=ledger.tm_write_bits * model.tm_write_pj_per_bit,
        trf_write_pj=ledger.trf_write_bits * model.trf_write_pj_per_bit,
        ia_pj=ledger.ia_bits * b,
        weight_pj=ledger.weight_bits * b,
        output_pj=ledger.acc_to_ob_bits * b,
    )


@dataclass(frozen=True)
class IBPass:
    """One IB fill: a run of lockstep steps whose IAs fit the IB together."""

    pass_index: int
    first_step: int
    n_steps: int
    new_bytes: int
    out_bytes: int
    compute_clocks: int
    onchip_clocks: int
    weight_bytes: int = 0


@dataclass(frozen=True)
class CostReport:
    layer: str
    dataflow: str
    traffic: TrafficLedger
    latency: LatencyBreakdown
    energy: EnergyReport
    utilization: float
    static_utilization: float
    n_outputs: int
    dram_overlap: bool

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "dataflow": self.dataflow,
            "n_outputs": self.n_outputs,
            "utilization": self.utilization,
            "static_utilization": self.static_utilization,
            "dram_overlap": self.dram_overlap,
            "traffic": self.traffic.to_dict(),
            "latency": self.latency.to_dict(),
            "energy": self.energy.to_dict(),
        }

    def csv_row(self) -> dict:
        row = {"layer": self.layer, "dataflow": self.dataflow}
        row.update(self.traffic.to_dict())
        row.update({k: v for k, v in self.latency.to_dict().items() if k != "clock_hz"})
        row.update(self.energy.to_dict())
        row["utilization"] = self.utilization
        return row


# -- simple rules ------------------------------------------------------------

def tm_write_cycles(k_h: int, k_w: int, N: int) -> int:
    """Clocks to write one kernel and its ``N - 1`` copies into the TM.

    Distinct weights go in one word per clock; each weight's copies then go
    in together with one more clock, whatever ``N`` is.
    """
    words = k_h * k_w
    return words * 2 if N > 1 else words


def ib_fill_seconds(macro: MacroConfig) -> float:
    return macro.ib_bytes / macro.dram_bw_bytes_per_s


def compute_seconds(computation_cycles: int, macro: MacroConfig) -> float:
    return computation_cycles * macro.clocks_per_compute / macro.clock_hz


# -- per-item accounting -----------------------------------------------------

class _Geometry:
    """Real (non-padding) extents of a layer in padded coordinates."""

    def __init__(self, layer: LayerSpec):
        self.layer = layer
        p = layer.padding
        self.r0, self.r1 = p, p + layer.H
        self.c0, self.c1 = p, p + layer.W
        self.Wp = layer.W_padded
        self.Hp = layer.H_padded
        self.kk = layer.k_h * layer.k_w
        # real IAs summed over every output window of one output row
        self.row_window_cols = sum(self.real_cols(w * layer.s, w * layer.s + layer.k_w)
                                   for w in range(layer.out_w))

    def real_rows(self, a: int, b: int) -> int:
        return max(0, min(b, self.r1) - max(a, self.r0))

    def real_cols(self, a: int, b: int) -> int:
        return max(0, min(b, self.c1) - max(a, self.c0))

    def padded_cols(self, a: int, b: int) -> int:
        return max(0, min(b, self.Wp) - max(a, 0))

    def col_mask(self, a: int, b: int) -> int:
        a, b = max(a, self.c0), min(b, self.c1)
        return ((1 << (b - a)) - 1) << a if b > a else 0


# item cost tuple layout
_TM, _TRF, _COMP, _OB, _OUT, _IB_TRF, _WB_TM, _IB_TM, _WB_TRF = range(9)


def _continues(layer: LayerSpec, item, prev) -> bool:
    """True when ``item`` is the next output row of ``prev``'s stream."""
    return (prev is not None and prev.channels == item.channels
            and prev.chunks == item.chunks and prev.row == item.row - 1)


def _window(plan: MappingPlan, geo: _Geometry, chunks: tuple) -> tuple:
    if plan.dataflow.duplicated and plan.scheduler is not None and plan.scheduler.value == "LITTLE":
        return 0, geo.Wp
    ch = [plan.chunks[j] for j in chunks]
    return min(c.in_start for c in ch), max(c.in_start + c.width for c in ch)


def _item_cost(plan: MappingPlan, geo: _Geometry, macro: MacroConfig,
               nch: int, chunks: tuple, row: int, first: bool, cont: bool) -> tuple:
    """Phase clocks and edge bits of one work item (see the module docstring)."""
    layer = plan.layer
    bits = macro.word_bits
    n_out = nch * sum(plan.chunks[j].n_out for j in chunks)
    cost = [0, 0, n_out * macro.clocks_per_compute, n_out, n_out, 0, 0, 0, 0]
    df = plan.dataflow
    top = layer.s * row

    if df is Dataflow.WS_BASELINE:
        if first:
            cost[_TM] = nch * geo.kk
            cost[_WB_TM] = nch * geo.kk * bits
        cost[_TRF] = n_out
        cost[_IB_TRF] = nch * geo.real_rows(top, top + layer.k_h) * geo.row_window_cols * bits
        return tuple(cost)

    a, b = _window(plan, geo, chunks)
    if df is Dataflow.IS_BASELINE:
        cost[_TM] = nch * layer.k_h * geo.padded_cols(a, b)
        cost[_IB_TM] = nch * geo.real_rows(top, top + layer.k_h) * geo.real_cols(a, b) * bits
        cost[_TRF] = n_out
        cost[_WB_TRF] = n_out * geo.kk * bits
        return tuple(cost)

    r_a, r_b = top, top + layer.k_h
    if macro.row_reuse and cont and layer.s < layer.k_h:
        r_a = r_b - layer.s
    ia_bits = nch * geo.real_rows(r_a, r_b) * geo.real_cols(a, b) * bits
    if df is Dataflow.WS_CONVDK:
        if first:
            cost[_TM] = nch * tm_write_cycles(layer.k_h, layer.k_w, plan.N)
            cost[_WB_TM] = nch * geo.kk * bits
        cost[_TRF] = 1
        cost[_IB_TRF] = ia_bits
    else:  # IS_CONVDK
        if first:
            cost[_TRF] = 1
            cost[_WB_TRF] = nch * geo.kk * bits
        cost[_TM] = nch * (r_b - r_a) * geo.padded_cols(a, b)
        cost[_IB_TM] = ia_bits
    return tuple(cost)


def _item_need(plan: MappingPlan, geo: _Geometry, chunks: tuple, row: int) -> tuple:
    """Real padded rows ``[r_a, r_b)`` and column mask an item reads from the IB."""
    layer = plan.layer
    # only columns some output window reads are fetched
    ch = [plan.chunks[j] for j in chunks]
    a = min(c.in_start for c in ch)
    b = max(c.in_start + (c.n_out - 1) * layer.s + layer.k_w for c in ch)
    top = layer.s * row
    return (max(top, geo.r0), min(top + plan.layer.k_h, geo.r1), geo.col_mask(a, b))


# IB contents are ``{(channels, padded_row): column_mask}``; channel groups
# of a plan are disjoint, so a group stands for all of its channels.

def _merge(into: dict, need: dict) -> None:
    for key, mask in need.items():
        into[key] = into.get(key, 0) | mask


def _nbytes(data: dict, word_bytes: int) -> int:
    return sum(m.bit_count() * len(key[0]) for key, m in data.items()) * word_bytes


# -- layer simulation --------------------------------------------------------

@dataclass
class _SimResult:
    ledger: TrafficLedger
    latency: LatencyBreakdown
    bands: list
    busy_row_clocks: float
    tm_write_total: int


def _tile_items(plan, geo, macro, ta, cost_cache, need_cache):
    out = []
    prev = None
    for item in ta.items:
        first = prev is None or prev.channels != item.channels
        key = (len(item.channels), item.chunks, item.row, first, _continues(plan.layer, item, prev))
        c = cost_cache.get(key)
        if c is None:
            c = cost_cache[key] = _item_cost(plan, geo, macro, *key)
        nkey = (item.chunks, item.row)
        n = need_cache.get(nkey)
        if n is None:
            n = need_cache[nkey] = _item_need(plan, geo, *nkey)
        out.append((c, item.channels, n))
        prev = item
    return out


def _simulate(plan: MappingPlan, macro: MacroConfig) -> _SimResult:
    layer = plan.layer
    geo = _Geometry(layer)
    word_bytes = max(1, macro.word_bits // 8)
    bits = macro.word_bits
    sums = [0] * 9
    comp = trf = tm = ob = 0
    busy = 0
    dram_ifmap_bytes = 0
    bands = []
    cost_cache, need_cache = {}, {}

    for p, tas in enumerate(plan.passes()):
        if not tas:
            continue
        tiles = [(ta.tm_rows_used, _tile_items(plan, geo, macro, ta, cost_cache, need_cache))
                 for ta in tas]
        n_steps = max(len(t[1]) for t in tiles)
        w_bytes = len({c for ta in tas for c in ta.channels}) * geo.kk * word_bytes
        pass_data = {}
        band_data, band_start, band_bytes = {}, 0, 0
        band_comp = band_onchip = band_out = 0
        prev_band = {}
        for i in range(n_steps):
            s_tm = s_trf = s_comp = s_ob = 0
            step_need = {}
            step_out = 0
            for rows_used, items in tiles:
                if i >= len(items):
                    continue
                c, chans, (r_a, r_b, mask) = items[i]
                if c[_TM] > s_tm:
                    s_tm = c[_TM]
                if c[_TRF] > s_trf:
                    s_trf = c[_TRF]
                if c[_COMP] > s_comp:
                    s_comp = c[_COMP]
                if c[_OB] > s_ob:
                    s_ob = c[_OB]
                for f in range(4, 9):
                    sums[f] += c[f]
                step_out += c[_OUT]
                busy += rows_used * c[_COMP]
                if not mask:
                    continue
                if (r_b - r_a) * mask.bit_count() * len(chans) * word_bytes > macro.ib_bytes:
                    raise CapacityError("%s: one sub-map needs more than the %d-byte IB"
                                        % (layer.name, macro.ib_bytes))
                for r in range(r_a, r_b):
                    key = (chans, r)
                    step_need[key] = step_need.get(key, 0) | mask
            tm += s_tm
            trf += s_trf
            comp += s_comp
            ob += s_ob
            _merge(pass_data, step_need)

            grow = sum((m & ~band_data.get(key, 0)).bit_count() * len(key[0])
                       for key, m in step_need.items()) * word_bytes
            if band_data and band_bytes + grow > macro.ib_bytes:
                bands.append(_close_band(p, band_start, i, band_data, prev_band, band_out,
                                         band_comp, band_onchip, word_bytes,
                                         w_bytes if band_start == 0 else 0))
                prev_band = band_data
                band_data, band_start = step_need, i
                band_bytes = _nbytes(step_need, word_bytes)
                band_comp = band_onchip = band_out = 0
            else:
                _merge(band_data, step_need)
                band_bytes += grow
            band_comp += s_comp
            band_onchip += s_tm + s_trf + s_comp + s_ob
            band_out += step_out * word_bytes
        bands.append(_close_band(p, band_start, n_steps, band_data, prev_band, band_out,
                                 band_comp, band_onchip, word_bytes,
                                 w_bytes if band_start == 0 else 0))
        dram_ifmap_bytes += _nbytes(pass_data, word_bytes)

    stall = _dram_stall(bands, macro)
    outputs = sums[_OUT]
    ledger = TrafficLedger(
        dram_to_ib_bits=dram_ifmap_bytes * 8,
        dram_to_wb_bits=layer.C * geo.kk * bits,
        ob_to_dram_bits=outputs * bits,
        ib_to_trf_bits=sums[_IB_TRF],
        wb_to_tm_bits=sums[_WB_TM],
        ib_to_tm_bits=sums[_IB_TM],
        wb_to_trf_bits=sums[_WB_TRF],
        acc_to_ob_bits=outputs * bits,
    )
    latency = LatencyBreakdown(comp, trf, tm, ob, stall, macro.clock_hz)
    return _SimResult(ledger, latency, bands, busy, tm)


def _close_band(p, start, stop, data, prev, out_bytes, comp, onchip, word_bytes,
                weight_bytes) -> IBPass:
    new = {}
    for key, mask in data.items():
        fresh = mask & ~prev.get(key, 0)
        if fresh:
            new[key] = fresh
    return IBPass(p, start, stop - start, _nbytes(new, word_bytes), out_bytes, comp, onchip,
                  weight_bytes)


def band_transfer_seconds(bands: list, b: int, macro: MacroConfig) -> float:
    """DRAM time overlapping band ``b``: next band's new IAs (plus the next
    pass's kernels) in, band ``b``'s outputs out."""
    nxt = bands[b + 1] if b + 1 < len(bands) else None
    load = nxt.new_bytes + nxt.weight_bytes if nxt is not None else 0
    return (load + bands[b].out_bytes) / macro.dram_bw_bytes_per_s


def _dram_stall(bands: list, macro: MacroConfig) -> int:
    """Clocks by which DRAM transfers outlast the computation they overlap.

    The first load of a layer overlaps the previous layer and is not charged.
    """
    stall = 0
    for b, band in enumerate(bands):
        excess = band_transfer_seconds(bands, b, macro) - band.compute_clocks / macro.clock_hz
        if excess > 0:
            stall += math.ceil(excess * macro.clock_hz - 1e-9)
    return stall


def _overlaps(bands: list, macro: MacroConfig) -> bool:
    return all(band_transfer_seconds(bands, b, macro) <= band.compute_clocks / macro.clock_hz
               for b, band in enumerate(bands))


def ib_passes(plan: MappingPlan, macro: MacroConfig) -> list:
    """IB fills of a plan, in execution order."""
    return _simulate(plan, macro).bands


def dram_overlap_check(plan: MappingPlan, macro: MacroConfig) -> bool:
    """True iff every IB band's DRAM traffic fits inside its compute time."""
    return _overlaps(_simulate(plan, macro).bands, macro)


def latency_rules(plan: MappingPlan, macro: MacroConfig) -> LatencyBreakdown:
    return _simulate(plan, macro).latency


def _effective_utilization(sim: _SimResult, macro: MacroConfig) -> float:
    """Time-averaged fraction of TM rows serving MACs.

    Rows count while their tile computes; a TM being rewritten word by word
    serves nothing, so rewrite time stays in the denominator.
    """
    span = sim.latency.compute_cycles + sim.tm_write_total
    if span == 0:
        return 0.0
    return sim.busy_row_clocks / (macro.n_tiles * macro.tm_rows * span)


def simulate_layer(layer: LayerSpec, plan: MappingPlan, macro: MacroConfig = MacroConfig(),
                   energy: EnergyModel = EnergyModel()) -> CostReport:
    if plan.layer != layer:
        raise ValueError("plan was built for %s, not %s" % (plan.layer.name, layer.name))
    sim = _simulate(plan, macro)
    return CostReport(
        layer=layer.name,
        dataflow=plan.dataflow.value,
        traffic=sim.ledger,
        latency=sim.latency,
        energy=energy_total(sim.ledger, energy),
        utilization=_effective_utilization(sim, macro),
        static_utilization=utilization(plan, macro),
        n_outputs=layer.n_outputs,
        dram_overlap=_overlaps(sim.bands, macro),
    )


def aggregate(reports: list, name: str = "network", energy: EnergyModel = EnergyModel()) -> CostReport:
    """Network totals; utilization is weighted by each layer's compute cycles."""
    if not reports:
        raise ValueError("no reports to aggregate")
    ledger = TrafficLedger()
    latency = LatencyBreakdown(clock_hz=reports[0].latency.clock_hz)
    for r in reports:
        ledger = ledger + r.traffic
        latency = latency + r.latency
    weights = [r.latency.compute_cycles for r in reports]
    wsum = sum(weights)

    def weighted(attr):
        if wsum == 0:
            return 0.0
        return sum(getattr(r, attr) * w for r, w in zip(reports, weights)) / wsum

    return CostReport(
        layer=name, dataflow=reports[0].dataflow, traffic=ledger, latency=latency,
        energy=energy_total(ledger, energy), utilization=weighted("utilization"),
        static_utilization=weighted("static_utilization"),
        n_outputs=sum(r.n_outputs for r in reports),
        dram_overlap=all(r.dram_overlap for r in reports))
