"""Bit-exact functional model of duplicated-kernel depthwise convolution.

Values are INT8 inputs and weights accumulated in a signed 32-bit register.
Arithmetic runs in int64 and every result is range-checked, so an overflow is
reported instead of wrapping.  ADCs are treated as ideal: the MAC is exact.

The tile path emulates the IA shift-and-mask unit: for each shift ``a`` the
TRF contents are shifted by ``a`` columns, cut into ``N`` blocks of width
``k_w`` (one per kernel copy in the TM) and only the blocks whose
multiplication-enable bit is set contribute an output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AccumulatorOverflow, LengthMismatch, ShapeMismatch
from .schedule import KernelGeometry, ShiftSchedule, full_schedule

INT8_MIN, INT8_MAX = -128, 127
ACC_MIN, ACC_MAX = -(2 ** 31), 2 ** 31 - 1


@dataclass(frozen=True)
class EnableMask:
    """Blocks whose multiplication-enable signal is high for one shift."""

    N: int
    active: frozenset

    def __post_init__(self):
        if any(not 0 <= n < self.N for n in self.active):
            raise ValueError("active blocks %s outside [0, %d)" % (sorted(self.active), self.N))

    def as_array(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=bool)
        mask[list(self.active)] = True
        return mask


def enable_masks(schedule: ShiftSchedule) -> dict:
    """One :class:`EnableMask` per shift amount of ``schedule``."""
    masks = {}
    for a, pairs in schedule.by_shift().items():
        masks[a] = EnableMask(schedule.N, frozenset(n for n, _ in pairs))
    return masks


def as_int8(x, name="tensor") -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype.kind not in "iub":
        if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("%s must hold integers" % name)
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < INT8_MIN or arr.max() > INT8_MAX):
        raise ValueError("%s has values outside the signed 8-bit range" % name)
    return arr


def check_accumulator(values: np.ndarray) -> np.ndarray:
    if values.size and (values.min() < ACC_MIN or values.max() > ACC_MAX):
        raise AccumulatorOverflow("MAC result outside the signed 32-bit accumulator range")
    return values


# -- oracles -----------------------------------------------------------------

def reference_conv1d(I, kernel, s: int) -> np.ndarray:
    """Direct valid-mode sliding-window convolution with stride ``s``."""
    I = np.asarray(I, dtype=np.int64)
    kernel = np.asarray(kernel, dtype=np.int64)
    k = len(kernel)
    if len(I) < k:
        raise LengthMismatch("input length %d shorter than kernel %d" % (len(I), k))
    n_out = (len(I) - k) // s + 1
    return np.array([int(np.dot(kernel, I[m * s:m * s + k])) for m in range(n_out)], dtype=np.int64)


def reference_dwconv(ifmap, kernel, s: int, padding: int = 0) -> np.ndarray:
    """Direct depthwise convolution: one 2D kernel per channel.

    ``ifmap`` is ``(C, H, W)`` and ``kernel`` is ``(C, k_h, k_w)``; the
    result has ``H' = (H + 2p - k_h)//s + 1`` rows and likewise ``W'``.
    """
    ifmap = np.asarray(ifmap, dtype=np.int64)
    kernel = np.asarray(kernel, dtype=np.int64)
    if ifmap.ndim != 3 or kernel.ndim != 3 or kernel.shape[0] != ifmap.shape[0]:
        raise ShapeMismatch("ifmap %s and kernel %s do not match" % (ifmap.shape, kernel.shape))
    C, H, W = ifmap.shape
    _, kh, kw = kernel.shape
    Hp, Wp = H + 2 * padding, W + 2 * padding
    if Hp < kh or Wp < kw:
        raise ShapeMismatch("padded ifmap %dx%d smaller than kernel %dx%d" % (Hp, Wp, kh, kw))
    x = np.pad(ifmap, ((0, 0), (padding, padding), (padding, padding)))
    Ho, Wo = (Hp - kh) // s + 1, (Wp - kw) // s + 1
    out = np.zeros((C, Ho, Wo), dtype=np.int64)
    for j in range(kh):
        for i in range(kw):
            window = x[:, j:j + s * (Ho - 1) + 1:s, i:i + s * (Wo - 1) + 1:s]
            out += kernel[:, j, i][:, None, None] * window
    return check_accumulator(out)


# -- 1D ----------------------------------------------------------------------

def convdk_step_value(I, kernel, a: int, n: int) -> int:
    """Block ``n``'s inner product at shift ``a``: ``sum_i k[i] * I[i + n*k + a]``."""
    k = len(kernel)
    start = n * k + a
    if start < 0 or start + k > len(I):
        raise LengthMismatch("block %d at shift %d reads past the input" % (n, a))
    return int(np.dot(np.asarray(kernel, dtype=np.int64), np.asarray(I[start:start + k], dtype=np.int64)))


def conv1d_convdk(I, kernel, s: int, N: int) -> np.ndarray:
    """1D convolution of ``I`` by ``kernel`` using ``N`` duplicated blocks.

    ``I`` must have exactly ``N*k + l - 1`` elements.
    """
    kernel = as_int8(kernel, "kernel")
    I = as_int8(I, "I")
    geometry = KernelGeometry(len(kernel), s)
    schedule = full_schedule(geometry, N)
    if len(I) != schedule.input_width:
        raise LengthMismatch("input length %d, expected N*k + l - 1 = %d"
                             % (len(I), schedule.input_width))
    values = _convdk_rows(I[None, None, None, :], kernel[None, None, :], schedule)
    z = np.empty(schedule.n_outputs, dtype=np.int64)
    for idx, (_, _, m) in enumerate(schedule.steps):
        z[m] = values[0, 0, idx]
    return check_accumulator(z)


# -- 2D tile -----------------------------------------------------------------

def _convdk_rows(slabs: np.ndarray, kernels: np.ndarray, schedule: ShiftSchedule) -> np.ndarray:
    """Shift-and-mask evaluation of every schedule step.

    ``slabs`` is ``(C0, R, k_h, width)``: for each channel and each output row
    the ``k_h`` IA rows resident in the TRF.  ``kernels`` is ``(C0, k_h, k_w)``.
    Returns ``(C0, R, n_steps)`` values in schedule order.
    """
    C0, R, kh, width = slabs.shape
    kw = kernels.shape[-1]
    N = schedule.N
    if width < schedule.input_width:
        raise ShapeMismatch("sub-map width %d < N*k_w + l - 1 = %d" % (width, schedule.input_width))
    out = np.empty((C0, R, schedule.n_outputs), dtype=np.int64)
    pos = 0
    for a, mask in sorted(enable_masks(schedule).items()):
        # shifter: TRF columns a .. a + N*k_w; one block per kernel copy
        shifted = slabs[..., a:a + N * kw].reshape(C0, R, kh, N, kw)
        active = np.flatnonzero(mask.as_array())
        # activator: only enabled blocks reach the TM
        blocks = shifted[:, :, :, active, :]
        y = np.einsum("crjbi,cji->crb", blocks, kernels)
        out[:, :, pos:pos + len(active)] = y
        pos += len(active)
    return out


def dwconv_tile(submap, kernel, schedule: ShiftSchedule, h: int = 0) -> list:
    """One output row of one channel, as ``[(m, value), ...]`` in step order.

    ``submap`` is ``(k_h', width)`` or ``(1, k_h', width)`` with at least
    ``s*h + k_h`` rows; row ``s*h + j`` feeds kernel row ``j``.
    """
    submap = as_int8(submap, "submap")
    if submap.ndim == 3:
        if submap.shape[0] != 1:
            raise ShapeMismatch("dwconv_tile takes a single channel")
        submap = submap[0]
    kernel = as_int8(kernel, "kernel")
    if kernel.ndim != 2 or submap.ndim != 2:
        raise ShapeMismatch("submap must be 2D rows x width and kernel k_h x k_w")
    kh, kw = kernel.shape
    g = schedule.geometry
    if kw != g.k:
        raise ShapeMismatch("kernel width %d does not match schedule k=%d" % (kw, g.k))
    r0 = g.s * h
    if submap.shape[0] < r0 + kh:
        raise ShapeMismatch("submap has %d rows, row %d needs %d" % (submap.shape[0], h, r0 + kh))
    slab = submap[r0:r0 + kh]
    values = check_accumulator(_convdk_rows(slab[None, None], kernel[None], schedule))
    return [(m, int(v)) for (_, _, m), v in zip(schedule.steps, values[0, 0])]


@dataclass
class MultiChannelResult:
    rows: np.ndarray   # (C0, n_outputs) indexed by output column m
    order: list        # (c, m) in emission order


def dwconv_multichannel(submaps, kernels, schedule: ShiftSchedule, h: int = 0) -> MultiChannelResult:
    """Several channels sharing one tile, iterated innermost per ``(a, n)``.

    The emission order follows the nesting ``for a: for n: for c``, so for a
    fixed block the channels come out on consecutive cycles.
    """
    submaps = as_int8(submaps, "submaps")
    kernels = as_int8(kernels, "kernels")
    if submaps.ndim != 3 or kernels.ndim != 3 or submaps.shape[0] != kernels.shape[0]:
        raise ShapeMismatch("expected (C0, rows, width) submaps and (C0, k_h, k_w) kernels")
    C0 = submaps.shape[0]
    kh, kw = kernels.shape[1:]
    g = schedule.geometry
    if kw != g.k:
        raise ShapeMismatch("kernel width %d does not match schedule k=%d" % (kw, g.k))
    r0 = g.s * h
    if submaps.shape[1] < r0 + kh:
        raise ShapeMismatch("submaps have %d rows, row %d needs %d" % (submaps.shape[1], h, r0 + kh))
    slabs = submaps[:, None, r0:r0 + kh, :]
    values = check_accumulator(_convdk_rows(slabs, kernels, schedule))[:, 0, :]
    rows = np.empty((C0, schedule.n_outputs), dtype=np.int64)
    order = []
    for idx, (_, _, m) in enumerate(schedule.steps):
        rows[:, m] = values[:, idx]
        order.extend((c, m) for c in range(C0))
    return MultiChannelResult(rows, order)


# -- whole-layer execution ---------------------------------------------------

def execute_plan(plan, ifmap, kernels) -> np.ndarray:
    """Run a duplicated-kernel mapping plan on concrete tensors.

    Every tile assignment is executed with the shift-and-mask path; outputs
    are scattered into the ofmap and each ``(c, h, w)`` must be written
    exactly once.  Baseline plans (no shift schedule) fall back to the direct
    oracle, since their value path is a plain windowed MAC.
    """
    layer = plan.layer
    ifmap = as_int8(ifmap, "ifmap")
    kernels = as_int8(kernels, "kernels")
    if ifmap.shape != (layer.C, layer.H, layer.W):
        raise ShapeMismatch("ifmap %s does not match layer %s" % (ifmap.shape, layer.name))
    if kernels.shape != (layer.C, layer.k_h, layer.k_w):
        raise ShapeMismatch("kernels %s do not match layer %s" % (kernels.shape, layer.name))
    if plan.schedule is None:
        return reference_dwconv(ifmap, kernels, layer.s, layer.padding)

    p, s, kh = layer.padding, layer.s, layer.k_h
    Ho, Wo = layer.out_h, layer.out_w
    geometry = KernelGeometry(layer.k_w, s)
    widest = max(ch.in_start + ch.width for ch in plan.chunks)
    # zero padding plus zero columns generated past the right edge
    x = np.zeros((layer.C, layer.H + 2 * p, max(widest, layer.W + 2 * p)), dtype=np.int64)
    x[:, p:p + layer.H, p:p + layer.W] = ifmap
    out = np.zeros((layer.C, Ho, Wo), dtype=np.int64)
    written = np.zeros((layer.C, Ho, Wo), dtype=np.int64)

    for ta in plan.tile_assignments:
        for group, chunk_ids, rows in ta.runs():
            chans = np.asarray(group)
            hs = np.asarray(rows)
            row_idx = (s * hs)[:, None] + np.arange(kh)[None, :]
            for ci in chunk_ids:
                ch = plan.chunks[ci]
                sched = full_schedule(geometry, ch.N)
                slabs = x[chans][:, row_idx, ch.in_start:ch.in_start + ch.width]
                vals = _convdk_rows(slabs, kernels[chans], sched)
                for idx, (_, _, m) in enumerate(sched.steps):
                    if m >= ch.n_out:
                        continue  # lands on generated zero columns
                    w = ch.out_start + m
                    out[chans[:, None], hs[None, :], w] = vals[:, :, idx]
                    written[chans[:, None], hs[None, :], w] += 1
    if not np.all(written == 1):
        raise AssertionError("plan %s covers some outputs %s times"
                             % (plan.dataflow, sorted(set(np.unique(written)) - {1})))
    return check_accumulator(out)
