"""Command-line entry point: ``convdk {schedule,run,compare,verify}``.

Exit codes: 0 success, 2 usage, 3 validation, 4 capacity, 5 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cost import EnergyModel
from .errors import (CapacityError, ConditionViolation, ParseError, TooNarrow,
                     ValidationError)
from .mapping import Dataflow, MacroConfig
from .report import compare, run_network
from .schedule import KernelGeometry, check_conditions, full_schedule
from .verify import run_all
from .workload import BUILTIN, get_model, load_network, read_overrides

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_VERIFY = 0, 2, 3, 4, 5


def _load_macro(path) -> MacroConfig:
    return MacroConfig.from_dict(read_overrides(path)) if path else MacroConfig()


def _load_energy(path) -> EnergyModel:
    return EnergyModel.from_dict(read_overrides(path)) if path else EnergyModel()


def _networks(args) -> list:
    if args.layers:
        return [load_network(args.layers)]
    names = args.model or ["mobilenet_v1"]
    if names == ["all"]:
        names = list(BUILTIN)
    return [get_model(n) for n in names]


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_schedule(args) -> int:
    g = KernelGeometry(args.kw, args.s)
    report = check_conditions(g)
    print(report.describe())
    if not report.ok:
        print("no complete schedule for k_w=%d, s=%d" % (args.kw, args.s), file=sys.stderr)
        return EXIT_VALIDATION
    sched = full_schedule(g, args.n)
    print("N=%d outputs=%d input_width=%d" % (args.n, sched.n_outputs, sched.input_width))
    print("%4s %4s %4s" % ("a", "n", "m"))
    for a, n, m in sched.steps:
        print("%4d %4d %4d" % (a, n, m))
    return EXIT_OK


def cmd_run(args) -> int:
    macro, energy = _load_macro(args.macro), _load_energy(args.energy)
    out = Path(args.output) if args.output else None
    for net in _networks(args):
        plans = [] if args.emit_plan else None
        run = run_network(net, args.dataflow, macro, energy, plans)
        stem = "%s_%s" % (net.name, run.dataflow.value)
        if out is None:
            print(run.csv_text(), end="")
            continue
        _write(out, stem + ".json", json.dumps(run.to_dict(), indent=2) + "\n")
        _write(out, stem + ".csv", run.csv_text())
        if plans is not None:
            _write(out, stem + ".plan.json", json.dumps(plans, indent=1) + "\n")
        t = run.total
        print("%s %s: %d layers, %.0f pJ, %d cycles, utilization %.2f%%"
              % (net.name, run.dataflow.value, len(run.layers), t.energy.total_pj,
                 t.latency.total_cycles, 100 * t.utilization))
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.model and not args.layers:
        args.model = ["all"]
    table = compare(_networks(args), _load_macro(args.macro), _load_energy(args.energy))
    if args.output:
        out = Path(args.output)
        _write(out, "comparison.csv", table.to_csv())
        _write(out, "comparison.json", table.to_json())
    for row in table.rows:
        print("%-20s %-12s util %6.2f%%  buffer %.3f  energy %.3f  latency %.3f  dram %.3f"
              % (row["model"], row["dataflow"], 100 * row["utilization"], row["buffer_traffic"],
                 row["energy"], row["latency"], row["dram_traffic"]))
    return EXIT_OK


def _grid(text: str) -> int:
    key, _, value = text.partition("=")
    if key != "kmax" or not value.isdigit() or int(value) < 3:
        raise argparse.ArgumentTypeError("expected kmax=<int >= 3>, got %r" % text)
    return int(value)


def cmd_verify(args) -> int:
    summary = run_all(kmax=args.grid, n_oracle=args.n, seed=args.seed)
    for line in summary.lines():
        print(line)
    return EXIT_OK if summary.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convdk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="print the shift schedule for one kernel geometry")
    p.add_argument("--kw", type=int, required=True, help="kernel width")
    p.add_argument("--s", type=int, required=True, help="stride")
    p.add_argument("--n", type=int, default=1, help="duplication count N (default 1)")
    p.set_defaults(func=cmd_schedule)

    def workload_args(p, dataflow):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--model", nargs="+", choices=list(BUILTIN) + ["all"])
        src.add_argument("--layers", help="JSON Lines layer file")
        if dataflow:
            p.add_argument("--dataflow", default=Dataflow.WS_CONVDK.value,
                           choices=[d.value for d in Dataflow])
        p.add_argument("--macro", help="JSON Lines macro overrides")
        p.add_argument("--energy", help="JSON Lines energy-constant overrides")
        p.add_argument("-o", "--output", help="output directory")

    p = sub.add_parser("run", help="cost one dataflow on a network")
    workload_args(p, True)
    p.add_argument("--emit-plan", action="store_true", help="also write the mapping plans")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="all four dataflows, normalized to the WS baseline")
    workload_args(p, False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="partition grid, oracle sweep and mutation canary")
    p.add_argument("--grid", type=_grid, default=11, metavar="kmax=K")
    p.add_argument("--n", type=int, default=120, help="random oracle instances")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValidationError, ParseError, ConditionViolation) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except (CapacityError, TooNarrow) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CAPACITY
    except (OSError, ValueError, TypeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
