"""The comparison dataflows: WS/IS baselines and IS with duplicated kernels.

All four dataflows produce :class:`~convdk.mapping.MappingPlan` objects and
go through the same cost model.  Tiling order is shared (channel-major over
tiles, row-major within a channel) so cost deltas come from the reuse
mechanism alone.
"""

from __future__ import annotations

from .mapping import (Chunk, Dataflow, LayerSpec, MacroConfig, MappingPlan, WorkItem,
                      pack_streams, plan_convdk)

DataflowId = Dataflow


def plan_ws_baseline(layer: LayerSpec, macro: MacroConfig) -> MappingPlan:
    """One un-duplicated kernel per tile; the TRF takes one window per output."""
    chunk = Chunk(0, layer.out_w, 0, layer.W_padded, 1)
    kernel_words = layer.k_h * layer.k_w
    streams = []
    for c in range(layer.C):
        items = [WorkItem((c,), (0,), h) for h in range(layer.out_h)]
        streams.append(((c,), items, kernel_words, kernel_words, (0, layer.W_padded)))
    assignments, n_passes = pack_streams(streams, macro.n_tiles, duplicate=False)
    return MappingPlan(layer, Dataflow.WS_BASELINE, None, 1, 1, 0, n_passes,
                       (chunk,), tuple(assignments), None)


def is_baseline_chunks(layer: LayerSpec, macro: MacroConfig, slab_width=None) -> list:
    """Column slabs stationed in the TM.

    ``slab_width`` defaults to the widest ``k_h``-tall slab the TM holds,
    clipped to the padded ifmap width.
    """
    if slab_width is None:
        slab_width = macro.tm_rows // layer.k_h
    width = min(layer.W_padded, slab_width)
    if width < layer.k_w:
        raise ValueError("IS slab of %d columns narrower than the kernel" % width)
    per_slab = (width - layer.k_w) // layer.s + 1
    chunks, start = [], 0
    while start < layer.out_w:
        n = min(per_slab, layer.out_w - start)
        chunks.append(Chunk(start, n, start * layer.s, (n - 1) * layer.s + layer.k_w, 1))
        start += n
    return chunks


def plan_is_baseline(layer: LayerSpec, macro: MacroConfig, slab_width=None) -> MappingPlan:
    """IA slabs stationed in the TM, kernel re-streamed through the TRF.

    Each output row rewrites the tile's slab word by word; the TRF is
    reloaded with the kernel aligned to every output window.
    """
    chunks = is_baseline_chunks(layer, macro, slab_width)
    kernel_words = layer.k_h * layer.k_w
    streams = []
    for c in range(layer.C):
        for j, ch in enumerate(chunks):
            items = [WorkItem((c,), (j,), h) for h in range(layer.out_h)]
            streams.append(((c,), items, layer.k_h * ch.width, kernel_words,
                            (ch.in_start, ch.in_start + ch.width)))
    assignments, n_passes = pack_streams(streams, macro.n_tiles, duplicate=False)
    return MappingPlan(layer, Dataflow.IS_BASELINE, None, 1, 1, 0, n_passes,
                       tuple(chunks), tuple(assignments), None)


def plan_is_convdk(layer: LayerSpec, macro: MacroConfig) -> MappingPlan:
    """IA sub-maps in the TM, the kernel duplicated ``N`` times in the TRF."""
    return plan_convdk(layer, macro, Dataflow.IS_CONVDK)


def plan_ws_convdk(layer: LayerSpec, macro: MacroConfig) -> MappingPlan:
    return plan_convdk(layer, macro, Dataflow.WS_CONVDK)


PLANNERS = {
    Dataflow.WS_BASELINE: plan_ws_baseline,
    Dataflow.IS_BASELINE: plan_is_baseline,
    Dataflow.WS_CONVDK: plan_ws_convdk,
    Dataflow.IS_CONVDK: plan_is_convdk,
}


def plan_layer(layer: LayerSpec, macro: MacroConfig, dataflow) -> MappingPlan:
    return PLANNERS[Dataflow(dataflow)](layer, macro)
