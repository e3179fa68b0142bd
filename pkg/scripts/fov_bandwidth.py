"""Field-of-view tiles: how much of the offered video survives the congested hop.

Varies the router buffer and prints delivered/offered next to the 1/6 target.

    python scripts/fov_bandwidth.py --capacities 7200 8000 9000 12128
"""

import argparse
from dataclasses import replace

from packetwash.scenarios import fov_tiles
from packetwash.sim import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--capacities", type=int, nargs="+", default=[7200, 8000, 9000, 12128])
    args = ap.parse_args()
    print(f"{'capacity':>8}  {'ratio':>8}  {'vs 1/6':>7}  {'washes':>6}  {'drops':>5}")
    for cap in args.capacities:
        [(_, sc)] = fov_tiles()
        sc = replace(sc, nodes=[replace(n, capacity_bytes=cap) if n.kind == "router" else n for n in sc.nodes])
        m = run(sc, trace=False).metrics[1]
        ratio = m.bytes_delivered / m.bytes_offered
        print(f"{cap:>8}  {ratio:8.5f}  {ratio * 6 - 1:+7.2%}  {m.wash_ops:>6}  {m.packets_dropped:>5}")


if __name__ == "__main__":
    main()
