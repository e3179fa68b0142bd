"""Sweep offered load on the dumbbell and compare washing routers with drop-tail.

    python scripts/legacy_vs_wash_sweep.py --loads 0.8 1.0 1.5 2.0 --seeds 3
"""

import argparse
import csv
import sys

import numpy as np

from packetwash.node import NodeMode
from packetwash.scenarios import dumbbell
from packetwash.sim import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--loads", type=float, nargs="+", default=[0.8, 1.0, 1.25, 1.5, 2.0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--duration-us", type=float, default=1_000_000)
    args = ap.parse_args()

    out = csv.writer(sys.stdout)
    out.writerow(["load", "mode", "seed", "goodput_Bps", "p99_ms", "retransmissions", "drops", "washes", "mean_quality"])
    for load in args.loads:
        for mode in (NodeMode.QUALITATIVE, NodeMode.LEGACY_DROPTAIL):
            for seed in range(args.seeds):
                res = run(dumbbell(seed, load, mode, duration_us=args.duration_us), trace=False)
                ms = list(res.metrics.values())
                lat = np.concatenate([res.latencies[f] for f in sorted(res.latencies)])
                out.writerow(
                    [
                        load,
                        mode.value,
                        seed,
                        f"{sum(m.goodput_bytes_per_s for m in ms):.0f}",
                        f"{np.percentile(lat, 99) / 1000:.2f}",
                        sum(m.retransmissions for m in ms),
                        sum(m.packets_dropped for m in ms),
                        sum(m.wash_ops for m in ms),
                        f"{np.mean([m.mean_quality for m in ms]):.3f}",
                    ]
                )


if __name__ == "__main__":
    main()
