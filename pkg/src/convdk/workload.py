"""Depthwise layer tables for the builtin networks and layer-file I/O.

Layer files are JSON Lines: an optional ``{"network": name}`` header, then
one layer object per line with keys ``name, C, H, W, k_h, k_w, s, padding``.
Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .mapping import LayerSpec
from .schedule import KernelGeometry, check_conditions

_LAYER_KEYS = ("name", "C", "H", "W", "k_h", "k_w", "s", "padding")


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            validate_layer(layer)

    def __len__(self) -> int:
        return len(self.layers)


def validate_layer(layer: LayerSpec) -> None:
    """Reject layers the duplicated-kernel schedule cannot run."""
    report = check_conditions(KernelGeometry(layer.k_w, layer.s))
    if not report.cond1:
        raise ValidationError("%s: k_w=%d, s=%d fails condition 1 (k odd, s < k)"
                              % (layer.name, layer.k_w, layer.s))
    if not report.ok:
        raise ValidationError("%s: k_w=%d, s=%d has no complete shift schedule\n%s"
                              % (layer.name, layer.k_w, layer.s, report.describe()))


def _dw(net: str, idx: int, C: int, H: int, k: int, s: int) -> LayerSpec:
    # square ifmap, square kernel, "same" padding
    return LayerSpec("%s.dw%d" % (net, idx), C, H, H, k, k, s, k // 2)


def _table(net: str, rows: list) -> NetworkSpec:
    return NetworkSpec(net, [_dw(net, i, *r) for i, r in enumerate(rows)])


def mobilenet_v1() -> NetworkSpec:
    # MobileNets (Howard et al. 2017), Table 1, 224x224 input, alpha = 1
    rows = [
        (32, 112, 3, 1),
        (64, 112, 3, 2),
        (128, 56, 3, 1),
        (128, 56, 3, 2),
        (256, 28, 3, 1),
        (256, 28, 3, 2),
    ]
    rows += [(512, 14, 3, 1)] * 5
    rows += [(512, 14, 3, 2), (1024, 7, 3, 1)]
    return _table("mobilenet_v1", rows)


def mobilenet_v2() -> NetworkSpec:
    # MobileNetV2 (Sandler et al. 2018), Table 2: bottleneck rows (t, c, n, s);
    # the depthwise layer sees t * c_in channels and takes the block stride.
    rows = [
        (32, 112, 3, 1),            # t=1, c=16, n=1, s=1
        (96, 112, 3, 2),            # t=6, c=24, n=2, s=2
        (144, 56, 3, 1),
        (144, 56, 3, 2),            # t=6, c=32, n=3, s=2
        (192, 28, 3, 1),
        (192, 28, 3, 1),
        (192, 28, 3, 2),            # t=6, c=64, n=4, s=2
        (384, 14, 3, 1),
        (384, 14, 3, 1),
        (384, 14, 3, 1),
        (384, 14, 3, 1),            # t=6, c=96, n=3, s=1
        (576, 14, 3, 1),
        (576, 14, 3, 1),
        (576, 14, 3, 2),            # t=6, c=160, n=3, s=2
        (960, 7, 3, 1),
        (960, 7, 3, 1),
        (960, 7, 3, 1),             # t=6, c=320, n=1, s=1
    ]
    return _table("mobilenet_v2", rows)


def mobilenet_v3_large() -> NetworkSpec:
    # Searching for MobileNetV3 (Howard et al. 2019), Table 1: rows
    # bneck(k, exp, out, s); the stem conv leaves 16 channels at 112x112.
    rows = [
        (16, 112, 3, 1),            # 3x3, exp 16
        (64, 112, 3, 2),            # 3x3, exp 64
        (72, 56, 3, 1),             # 3x3, exp 72
        (72, 56, 5, 2),             # 5x5, exp 72
        (120, 28, 5, 1),
        (120, 28, 5, 1),            # 5x5, exp 120
        (240, 28, 3, 2),            # 3x3, exp 240
        (200, 14, 3, 1),
        (184, 14, 3, 1),
        (184, 14, 3, 1),
        (480, 14, 3, 1),
        (672, 14, 3, 1),
        (672, 14, 5, 2),            # 5x5, exp 672
        (960, 7, 5, 1),
        (960, 7, 5, 1),             # 5x5, exp 960
    ]
    return _table("mobilenet_v3_large", rows)


def mobilenet_v3_small() -> NetworkSpec:
    # Searching for MobileNetV3 (Howard et al. 2019), Table 2
    rows = [
        (16, 112, 3, 2),            # 3x3, exp 16
        (72, 56, 3, 2),             # 3x3, exp 72
        (88, 28, 3, 1),             # 3x3, exp 88
        (96, 28, 5, 2),             # 5x5, exp 96
        (240, 14, 5, 1),
        (240, 14, 5, 1),
        (120, 14, 5, 1),
        (144, 14, 5, 1),
        (288, 14, 5, 2),
        (576, 7, 5, 1),
        (576, 7, 5, 1),
    ]
    return _table("mobilenet_v3_small", rows)


def efficientnet_b0() -> NetworkSpec:
    # EfficientNet (Tan & Le 2019), Table 1: MBConv stages; expansion 6
    # except the first stage, first block of a stage takes the stride.
    rows = [
        (32, 112, 3, 1),            # MBConv1, k3, 16 out
        (96, 112, 3, 2),
        (144, 56, 3, 1),            # MBConv6, k3, 24 out
        (144, 56, 5, 2),
        (240, 28, 5, 1),            # MBConv6, k5, 40 out
        (240, 28, 3, 2),
        (480, 14, 3, 1),
        (480, 14, 3, 1),            # MBConv6, k3, 80 out
        (480, 14, 5, 1),
        (672, 14, 5, 1),
        (672, 14, 5, 1),            # MBConv6, k5, 112 out
        (672, 14, 5, 2),
        (1152, 7, 5, 1),
        (1152, 7, 5, 1),
        (1152, 7, 5, 1),            # MBConv6, k5, 192 out
        (1152, 7, 3, 1),            # MBConv6, k3, 320 out
    ]
    return _table("efficientnet_b0", rows)


BUILTIN = {
    "mobilenet_v1": mobilenet_v1,
    "mobilenet_v2": mobilenet_v2,
    "mobilenet_v3_large": mobilenet_v3_large,
    "mobilenet_v3_small": mobilenet_v3_small,
    "efficientnet_b0": efficientnet_b0,
}


def builtin_models() -> list:
    return [make() for make in BUILTIN.values()]


def get_model(name: str) -> NetworkSpec:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValidationError("unknown model %r (choose from %s)"
                              % (name, ", ".join(BUILTIN))) from None


def read_jsonl(path) -> list:
    """``(line_number, object)`` pairs of a JSON Lines file."""
    out = []
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError("%s:%d: %s" % (path, lineno, exc.msg)) from None
        if not isinstance(obj, dict):
            raise ParseError("%s:%d: expected an object" % (path, lineno))
        out.append((lineno, obj))
    return out


def read_overrides(path) -> dict:
    """Merge every object of a JSON Lines overrides file into one dict."""
    merged = {}
    for _, obj in read_jsonl(path):
        merged.update(obj)
    return merged


def _layer_from(obj: dict, where: str, index: int) -> LayerSpec:
    unknown = set(obj) - set(_LAYER_KEYS)
    if unknown:
        raise ParseError("%s: unknown keys %s" % (where, ", ".join(sorted(unknown))))
    data = dict(obj)
    data.setdefault("name", "layer%d" % index)
    missing = [k for k in _LAYER_KEYS if k not in data and k != "padding"]
    if missing:
        raise ParseError("%s: missing keys %s" % (where, ", ".join(missing)))
    try:
        layer = LayerSpec(**data)
        validate_layer(layer)
    except ValidationError as exc:
        raise ValidationError("%s: %s" % (where, exc)) from None
    return layer


def load_network(path) -> NetworkSpec:
    entries = read_jsonl(path)
    name = Path(path).stem
    if entries and set(entries[0][1]) == {"network"}:
        name = str(entries[0][1]["network"])
        entries = entries[1:]
    layers = [_layer_from(obj, "%s:%d" % (path, lineno), i)
              for i, (lineno, obj) in enumerate(entries)]
    return NetworkSpec(name, layers)


def dumps_network(net: NetworkSpec) -> str:
    lines = [json.dumps({"network": net.name})]
    lines += [json.dumps(layer.to_dict()) for layer in net.layers]
    return "\n".join(lines) + "\n"


def save_network(net: NetworkSpec, path) -> None:
    Path(path).write_text(dumps_network(net))
