"""Per-network runs and the four-way comparison table."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .baselines import plan_layer
from .cost import CostReport, EnergyModel, aggregate, simulate_layer
from .errors import ConvDKError, ValidationError
from .mapping import Dataflow, MacroConfig
from .workload import NetworkSpec

BASE = Dataflow.WS_BASELINE

# (column, getter) pairs normalized against the WS baseline of the same model
NORMALIZED = (
    ("dram_traffic", lambda r: r.traffic.dram_bits),
    ("buffer_traffic", lambda r: r.traffic.buffer_bits),
    ("energy", lambda r: r.energy.total_pj),
    ("latency", lambda r: r.latency.total_cycles),
    ("buffer_latency", lambda r: r.latency.buffer_cycles),
)

# breakdowns as fractions of the WS baseline's total energy / latency
ENERGY_PARTS = ("dram_pj", "ia_pj", "weight_pj", "output_pj", "tm_write_pj", "trf_write_pj")
LATENCY_PARTS = ("compute_cycles", "trf_load_cycles", "tm_write_cycles", "ob_write_cycles",
                 "dram_stall_cycles")


@dataclass
class NetworkRun:
    network: str
    dataflow: Dataflow
    layers: list
    total: CostReport

    def to_dict(self) -> dict:
        return {"network": self.network, "dataflow": self.dataflow.value,
                "layers": [r.to_dict() for r in self.layers], "total": self.total.to_dict()}

    def csv_text(self) -> str:
        rows = [r.csv_row() for r in self.layers] + [self.total.csv_row()]
        return _csv(rows)


def run_network(net: NetworkSpec, dataflow, macro: MacroConfig = MacroConfig(),
                energy: EnergyModel = EnergyModel(), plans: list = None) -> NetworkRun:
    """Plan and cost every layer; errors carry the layer name."""
    dataflow = Dataflow(dataflow)
    if not net.layers:
        raise ValidationError("%s: no layers" % net.name)
    reports = []
    for layer in net.layers:
        try:
            plan = plan_layer(layer, macro, dataflow)
            reports.append(simulate_layer(layer, plan, macro, energy))
        except ConvDKError as exc:
            raise type(exc)(*_with_context(exc, layer.name)) from exc
        if plans is not None:
            plans.append(plan.to_dict())
    total = aggregate(reports, name=net.name, energy=energy)
    return NetworkRun(net.name, dataflow, reports, total)


def _with_context(exc, name):
    if hasattr(exc, "report"):
        return (exc.report, "%s: %s" % (name, exc))
    return ("%s: %s" % (name, exc),)


@dataclass
class ComparisonTable:
    rows: list = field(default_factory=list)

    @classmethod
    def build(cls, runs: list) -> "ComparisonTable":
        by_model = {}
        for run in runs:
            by_model.setdefault(run.network, {})[run.dataflow] = run.total
        rows = []
        for model in sorted(by_model):
            reps = by_model[model]
            if BASE not in reps:
                raise ValueError("%s: no %s run to normalize against" % (model, BASE.value))
            base = reps[BASE]
            for df in Dataflow:
                if df not in reps:
                    continue
                r = reps[df]
                row = {"model": model, "dataflow": df.value, "utilization": r.utilization,
                       "static_utilization": r.static_utilization}
                for name, get in NORMALIZED:
                    row[name] = _ratio(get(r), get(base))
                e = r.energy.to_dict()
                for part in ENERGY_PARTS:
                    row["energy_" + part] = _ratio(e[part], base.energy.total_pj)
                lat = r.latency.to_dict()
                for part in LATENCY_PARTS:
                    row["latency_" + part] = _ratio(lat[part], base.latency.total_cycles)
                rows.append(row)
        return cls(rows)

    def to_json(self) -> str:
        return json.dumps(self.rows, indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        return _csv(self.rows)

    def get(self, model: str, dataflow) -> dict:
        df = Dataflow(dataflow).value
        for row in self.rows:
            if row["model"] == model and row["dataflow"] == df:
                return row
        raise KeyError((model, df))


def _ratio(a, b) -> float:
    if b == 0:
        return 1.0 if a == 0 else float("inf")
    return a / b


def _csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def compare(nets: list, macro: MacroConfig = MacroConfig(),
            energy: EnergyModel = EnergyModel()) -> ComparisonTable:
    runs = [run_network(net, df, macro, energy) for net in nets for df in Dataflow]
    return ComparisonTable.build(runs)
