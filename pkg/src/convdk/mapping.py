"""Placement of depthwise layers onto the 64-tile CIM macro.

Each layer is cut into *chunks*: runs of output columns produced from one
sub-map of the padded ifmap.  Chunks of a channel (or of ``N_ch`` channels
under the LITTLE scheduler) form a stream that one tile walks row by row.
Streams are packed onto tiles pass by pass; tiles left idle in a pass take
kernel copies and split the stream's work with the original tile.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, asdict, replace
from typing import Optional

from .errors import CapacityError, ConditionViolation, TooNarrow, ValidationError
from .schedule import (KernelGeometry, ShiftSchedule, check_conditions, full_schedule,
                       output_count)

# DDR4-3200 is quoted as 25.6 GB/s; with the IB sized in KiB the 16 KiB fill
# time of 625 ns only comes out if the same binary kilo is used for the
# bandwidth, i.e. 25.6 KiB per microsecond.
DDR4_3200_BYTES_PER_S = 25.6 * 1024 * 1e6


class Scheduler(str, enum.Enum):
    BIG = "BIG"
    LITTLE = "LITTLE"


class Dataflow(str, enum.Enum):
    WS_BASELINE = "ws-baseline"
    IS_BASELINE = "is-baseline"
    WS_CONVDK = "ws-convdk"
    IS_CONVDK = "is-convdk"

    @property
    def input_stationary(self) -> bool:
        return self in (Dataflow.IS_BASELINE, Dataflow.IS_CONVDK)

    @property
    def duplicated(self) -> bool:
        return self in (Dataflow.WS_CONVDK, Dataflow.IS_CONVDK)


@dataclass(frozen=True)
class MacroConfig:
    n_tiles: int = 64
    tm_rows: int = 180
    word_bits: int = 8
    trf_words: int = 180
    ib_bytes: int = 16384
    ob_bytes: int = 16384
    wb_bytes: int = 4096
    n_adcs_per_tile: int = 8
    clock_hz: float = 250e6
    dram_bw_bytes_per_s: float = DDR4_3200_BYTES_PER_S
    clocks_per_compute: int = 10
    # TRF/TM keep the k_h - s rows shared by consecutive output rows of a
    # stream and only take the s new rows; baselines never use it.
    row_reuse: bool = True

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "row_reuse":
                continue
            if value <= 0:
                raise ValidationError("MacroConfig.%s must be positive, got %r" % (f.name, value))

    @classmethod
    def from_dict(cls, data: dict) -> "MacroConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError("unknown macro fields: %s" % ", ".join(sorted(unknown)))
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    C: int
    H: int
    W: int
    k_h: int
    k_w: int
    s: int
    padding: int = 0

    def __post_init__(self):
        for name in ("C", "H", "W", "k_h", "k_w", "s", "padding"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError("%s: %s must be an integer, got %r" % (self.name, name, value))
        if self.C < 0 or self.H < 1 or self.W < 1 or self.k_h < 1 or self.k_w < 1 or self.s < 1:
            raise ValidationError("%s: non-positive dimension" % self.name)
        if self.padding < 0:
            raise ValidationError("%s: negative padding" % self.name)
        if self.H + 2 * self.padding < self.k_h or self.W + 2 * self.padding < self.k_w:
            raise ValidationError("%s: kernel larger than padded ifmap" % self.name)

    @property
    def W_padded(self) -> int:
        return self.W + 2 * self.padding

    @property
    def H_padded(self) -> int:
        return self.H + 2 * self.padding

    @property
    def out_h(self) -> int:
        return (self.H_padded - self.k_h) // self.s + 1

    @property
    def out_w(self) -> int:
        return (self.W_padded - self.k_w) // self.s + 1

    @property
    def n_outputs(self) -> int:
        return self.C * self.out_h * self.out_w

    @property
    def geometry(self) -> KernelGeometry:
        return KernelGeometry(self.k_w, self.s)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Chunk:
    """A run of output columns computed from one sub-map.

    ``in_start`` and ``width`` are in padded-ifmap columns; the window may
    reach past the padded edge, where zeros are generated at the TRF input.
    """

    out_start: int
    n_out: int
    in_start: int
    width: int
    N: int


@dataclass(frozen=True)
class WorkItem:
    channels: tuple
    chunks: tuple
    row: int


@dataclass(frozen=True)
class TileAssignment:
    tile: int
    pass_index: int
    channels: tuple
    items: tuple
    tm_rows_used: int
    trf_words_used: int
    columns: tuple  # (start, stop) in padded-ifmap columns

    @property
    def tm_row_range(self) -> tuple:
        return (0, self.tm_rows_used)

    @property
    def rows(self) -> tuple:
        return (self.items[0].row, self.items[-1].row) if self.items else ()

    def runs(self):
        """Items grouped by ``(channels, chunks)``: ``(channels, chunks, rows)``."""
        groups = {}
        for it in self.items:
            groups.setdefault((it.channels, it.chunks), []).append(it.row)
        for (chans, chunks), rows in groups.items():
            yield chans, chunks, rows


@dataclass(frozen=True)
class MappingPlan:
    layer: LayerSpec
    dataflow: Dataflow
    scheduler: Optional[Scheduler]
    N: int
    N_ch: int
    cross_tile_copies: int
    n_passes: int
    chunks: tuple
    tile_assignments: tuple
    schedule: Optional[ShiftSchedule]

    @property
    def tm_rows_used(self) -> dict:
        """Peak TM rows used, per tile index."""
        used = {}
        for ta in self.tile_assignments:
            used[ta.tile] = max(used.get(ta.tile, 0), ta.tm_rows_used)
        return used

    def passes(self) -> list:
        out = [[] for _ in range(self.n_passes)]
        for ta in self.tile_assignments:
            out[ta.pass_index].append(ta)
        return out

    def to_dict(self) -> dict:
        return {
            "layer": self.layer.to_dict(),
            "dataflow": self.dataflow.value,
            "scheduler": self.scheduler.value if self.scheduler else None,
            "N": self.N,
            "N_ch": self.N_ch,
            "cross_tile_copies": self.cross_tile_copies,
            "n_passes": self.n_passes,
            "schedule": None if self.schedule is None else {
                "k": self.schedule.geometry.k, "s": self.schedule.geometry.s,
                "l": self.schedule.params.l, "m1": self.schedule.params.m1,
                "n1": self.schedule.params.n1, "N": self.schedule.N,
            },
            "chunks": [asdict(c) for c in self.chunks],
            "tile_assignments": [
                {
                    "tile": ta.tile,
                    "pass": ta.pass_index,
                    "channels": list(ta.channels),
                    "columns": list(ta.columns),
                    "rows": list(ta.rows),
                    "tm_rows": list(ta.tm_row_range),
                    "n_items": len(ta.items),
                }
                for ta in self.tile_assignments
            ],
        }


# -- primitive rules ---------------------------------------------------------

def compute_tw(macro: MacroConfig, k_h: int, words: Optional[int] = None) -> int:
    """Widest ``k_h``-tall slab that fits ``words`` (default: the TRF)."""
    if k_h < 1:
        raise ValueError("k_h must be >= 1")
    return (macro.trf_words if words is None else words) // k_h


def duplication_count(W: int, T_w: int, k_w: int, s: int) -> int:
    """Kernel copies per tile, ``floor((min(W, T_w) - l + 1) / k_w)``."""
    l = KernelGeometry(k_w, s).l  # noqa: E741
    width = min(W, T_w)
    if width < k_w + l - 1:
        raise TooNarrow("width %d cannot hold one block (needs k_w + l - 1 = %d)"
                        % (width, k_w + l - 1))
    return (width - l + 1) // k_w


def select_scheduler(layer: LayerSpec, macro: MacroConfig, words: Optional[int] = None) -> Scheduler:
    T_w = compute_tw(macro, layer.k_h, words)
    return Scheduler.BIG if layer.W_padded > T_w else Scheduler.LITTLE


def convdk_chunks(out_w: int, geometry: KernelGeometry, N: int) -> list:
    """Split ``out_w`` output columns into sub-maps of at most ``N`` blocks.

    Full sub-maps yield ``floor(((N-1)k + l - 1)/s) + 1`` outputs each and
    abut in output space, so neighbouring windows overlap by
    ``N*k + l - 1 - M*s`` input columns.  The last sub-map uses the fewest
    blocks that still cover the leftover columns.
    """
    M = output_count(geometry, N)
    k, l = geometry.k, geometry.l
    chunks = []
    start = 0
    while start < out_w:
        remaining = out_w - start
        if remaining >= M:
            Nj, n = N, M
        else:
            Nj = 1
            while output_count(geometry, Nj) < remaining:
                Nj += 1
            n = remaining
        chunks.append(Chunk(start, n, start * geometry.s, Nj * k + l - 1, Nj))
        start += n
    return chunks


def cross_tile_copies(C: int, N_ch: int, n_tiles: int) -> int:
    groups = math.ceil(C / N_ch) if C else 0
    if groups == 0:
        return 0
    return max(0, n_tiles // groups - 1)


def _split_even(items: list, parts: int) -> list:
    base, extra = divmod(len(items), parts)
    out, pos = [], 0
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        out.append(items[pos:pos + size])
        pos += size
    return out


def pack_streams(streams: list, n_tiles: int, duplicate: bool) -> list:
    """Place ``(channels, items, tm_rows, trf_words, columns)`` streams on tiles.

    Streams fill tiles in order, ``n_tiles`` per pass.  With ``duplicate``
    the tiles a pass leaves idle hold copies of its kernels: stream ``g``
    runs on tiles ``g, g + G, g + 2G, ...`` and its items are split into
    contiguous runs across them.
    """
    assignments = []
    n_passes = math.ceil(len(streams) / n_tiles) if streams else 0
    for p in range(n_passes):
        batch = streams[p * n_tiles:(p + 1) * n_tiles]
        G = len(batch)
        copies = n_tiles // G if duplicate else 1
        for g, (chans, items, tm_rows, trf_words, columns) in enumerate(batch):
            for replica, part in enumerate(_split_even(items, copies)):
                if not part:
                    continue
                assignments.append(TileAssignment(
                    tile=replica * G + g, pass_index=p, channels=chans, items=tuple(part),
                    tm_rows_used=tm_rows, trf_words_used=trf_words, columns=columns))
    assignments.sort(key=lambda ta: (ta.pass_index, ta.tile))
    return assignments, n_passes


# -- duplicated-kernel plans -------------------------------------------------

def _convdk_plan(layer: LayerSpec, macro: MacroConfig, dataflow: Dataflow,
                 scheduler: Optional[Scheduler] = None) -> MappingPlan:
    report = check_conditions(layer.geometry)
    if not report.ok:
        raise ConditionViolation(report)
    # WS: IAs sit in the TRF, kernels in the TM; IS swaps the two.
    ia_words = macro.tm_rows if dataflow.input_stationary else macro.trf_words
    w_words = macro.trf_words if dataflow.input_stationary else macro.tm_rows
    T_w = compute_tw(macro, layer.k_h, ia_words)
    if scheduler is None:
        scheduler = select_scheduler(layer, macro, ia_words)
    Wp = layer.W_padded
    g = layer.geometry
    try:
        N = duplication_count(Wp, T_w, layer.k_w, layer.s)
    except TooNarrow:
        if T_w < layer.k_w + g.l - 1:
            raise
        N = 1  # padded width shorter than one block: zeros fill the rest

    if scheduler is Scheduler.BIG:
        N_ch = 1
    else:
        if Wp > T_w:
            raise TooNarrow("%s: LITTLE needs the padded row (%d) to fit T_w=%d"
                            % (layer.name, Wp, T_w))
        N_ch = max(1, min(layer.C, ia_words // (layer.k_h * Wp))) if layer.C else 1

    kernel_words = N * layer.k_h * layer.k_w
    if N_ch * kernel_words > w_words:
        raise CapacityError("%s: %d kernels x %d copies exceed %d words"
                            % (layer.name, N_ch, N, w_words))

    chunks = convdk_chunks(layer.out_w, g, N)
    rows = range(layer.out_h)
    streams = []
    for c0 in range(0, layer.C, N_ch):
        group = tuple(range(c0, min(layer.C, c0 + N_ch)))
        if scheduler is Scheduler.BIG:
            items = [WorkItem(group, (j,), h) for j in range(len(chunks)) for h in rows]
            ia = layer.k_h * max(ch.width for ch in chunks)
            columns = (chunks[0].in_start, max(ch.in_start + ch.width for ch in chunks))
        else:
            items = [WorkItem(group, tuple(range(len(chunks))), h) for h in rows]
            ia = len(group) * layer.k_h * Wp
            columns = (0, Wp)
        w = len(group) * kernel_words
        tm, trf = (ia, w) if dataflow.input_stationary else (w, ia)
        if tm > macro.tm_rows or trf > macro.trf_words:
            raise CapacityError("%s: stream needs %d TM rows / %d TRF words"
                                % (layer.name, tm, trf))
        streams.append((group, items, tm, trf, columns))

    assignments, n_passes = pack_streams(streams, macro.n_tiles, duplicate=True)
    assignments = [replace(ta, columns=_columns(ta, chunks)) for ta in assignments]
    return MappingPlan(
        layer=layer, dataflow=dataflow, scheduler=scheduler, N=N, N_ch=N_ch,
        cross_tile_copies=cross_tile_copies(layer.C, N_ch, macro.n_tiles),
        n_passes=n_passes, chunks=tuple(chunks), tile_assignments=tuple(assignments),
        schedule=full_schedule(g, N))


def _columns(ta: TileAssignment, chunks: list) -> tuple:
    used = sorted({j for it in ta.items for j in it.chunks})
    return (chunks[used[0]].in_start, max(chunks[j].in_start + chunks[j].width for j in used))


def plan_big(layer: LayerSpec, macro: MacroConfig, dataflow: Dataflow = Dataflow.WS_CONVDK) -> MappingPlan:
    """Wide ifmaps: one channel per tile, width cut into sub-maps."""
    return _convdk_plan(layer, macro, dataflow, Scheduler.BIG)


def plan_little(layer: LayerSpec, macro: MacroConfig, dataflow: Dataflow = Dataflow.WS_CONVDK) -> MappingPlan:
    """Narrow ifmaps: ``N_ch`` whole padded rows share a tile."""
    return _convdk_plan(layer, macro, dataflow, Scheduler.LITTLE)


def plan_convdk(layer: LayerSpec, macro: MacroConfig, dataflow: Dataflow = Dataflow.WS_CONVDK) -> MappingPlan:
    return _convdk_plan(layer, macro, dataflow)


def utilization(plan: MappingPlan, macro: MacroConfig) -> float:
    """Static TM occupancy: rows holding operands over all tiles' rows.

    Passes are weighted by their length in work items, so a short trailing
    pass counts for less.
    """
    total_w = 0
    acc = 0.0
    for tas in plan.passes():
        if not tas:
            continue
        steps = max(len(ta.items) for ta in tas)
        rows = sum(ta.tm_rows_used for ta in tas)
        acc += steps * rows / (macro.n_tiles * macro.tm_rows)
        total_w += steps
    return acc / total_w if total_w else 0.0
