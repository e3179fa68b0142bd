"""Command-line entry point: ``packetwash run`` and ``packetwash overhead``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .scenarios import PRESETS, Runs, resolve
from .sim import BadScenario, FlowMetrics, SimResult, run
from .wire import OverheadModel, header_overhead

METRIC_FIELDS = [f for f in FlowMetrics.__dataclass_fields__ if f != "flow"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def metrics_csv(results: list[tuple[str, SimResult]]) -> str:
    lines = ["run,flow," + ",".join(METRIC_FIELDS)]
    for label, res in results:
        for fid in sorted(res.metrics):
            row = res.metrics[fid].row()
            lines.append(f"{label},{fid}," + ",".join(_fmt(row[k]) for k in METRIC_FIELDS))
    return "\n".join(lines) + "\n"


def run_summary(label: str, res: SimResult) -> dict:
    ms = list(res.metrics.values())
    lat = [x for fid in sorted(res.latencies) for x in res.latencies[fid]]
    offered = sum(m.bytes_offered for m in ms)
    delivered = sum(m.bytes_delivered for m in ms)
    return {
        "run": label,
        "goodput_Bps": sum(m.goodput_bytes_per_s for m in ms),
        "p99_latency_us": float(np.percentile(lat, 99)) if lat else 0.0,
        "retransmissions": sum(m.retransmissions for m in ms),
        "drops": sum(m.packets_dropped for m in ms),
        "washes": sum(m.wash_ops for m in ms),
        "delivered_bytes": delivered,
        "offered_bytes": offered,
        "delivered_ratio": delivered / offered if offered else 0.0,
        "units": f"{sum(m.units_delivered for m in ms)}/{sum(m.units_sent for m in ms)}",
    }


def summary_text(name: str, seed: int, results: list[tuple[str, SimResult]]) -> str:
    rows = [run_summary(label, res) for label, res in results]
    cols = list(rows[0])
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out = [f"scenario {name}  seed {seed}", ""]
    out.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    out += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    out.append("")
    for label, res in results:
        for fid in sorted(res.metrics):
            m = res.metrics[fid]
            status = "delivered" if m.units_delivered == m.units_sent else "incomplete"
            out.append(
                f"[{label}] flow {fid}: {m.units_delivered}/{m.units_sent} units {status}, "
                f"retransmissions {m.retransmissions}, washes {m.wash_ops}, drops {m.packets_dropped}, "
                f"mean quality {m.mean_quality:.3f}"
            )
    return "\n".join(out) + "\n"


def execute(runs: Runs, trace: bool = False) -> list[tuple[str, SimResult]]:
    return [(label, run(sc, trace=trace)) for label, sc in runs]


def cmd_run(args) -> int:
    try:
        runs = resolve(args.scenario, args.seed)
        results = execute(runs, trace=args.trace)
    except (BadScenario, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    seed = runs[0][1].seed
    text = summary_text(args.scenario, seed, results)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(text)
        (out / "metrics.csv").write_text(metrics_csv(results))
        if args.trace:
            with open(out / "trace.ndjson", "w") as fh:
                for label, res in results:
                    for rec in res.trace:
                        fh.write(_trace_line(label, rec))
    return 0


def _trace_line(label: str, rec: dict) -> str:
    return json.dumps({"run": label, **rec}, separators=(",", ":")) + "\n"


def _pct(x: Fraction) -> str:
    return f"{float(x * 100):.2f}%"


def cmd_overhead(args) -> int:
    if args.levels < 1 or args.mtu < 64:
        print("error: levels must be >= 1 and mtu >= 64", file=sys.stderr)
        return 2
    paper = header_overhead(args.levels, args.mtu, OverheadModel.PAPER_4B)
    actual = header_overhead(args.levels, args.mtu, OverheadModel.ACTUAL)
    print(f"levels={args.levels} mtu={args.mtu}")
    print(f"PAPER_4B  {_pct(paper)}  ({paper})")
    print(f"ACTUAL    {_pct(actual)}  ({actual})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="packetwash", description="Qualitative-packet (Packet Wash) network simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a preset or a YAML scenario file")
    r.add_argument("scenario", help=f"preset ({', '.join(PRESETS)}) or path to a .yaml file")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", help="directory for summary.txt, metrics.csv and trace.ndjson")
    r.add_argument("--trace", action="store_true", help="write per-event trace.ndjson")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("overhead", help="header overhead for a number of chunk levels at an MTU")
    o.add_argument("levels", type=int)
    o.add_argument("mtu", type=int)
    o.set_defaults(func=cmd_overhead)

    sub.add_parser("presets", help="list built-in presets").set_defaults(
        func=lambda args: print("\n".join(PRESETS)) or 0
    )
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
