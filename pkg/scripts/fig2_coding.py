"""In-packet coding: decode success when chunks are washed, by redundancy.

For k source chunks coded to k' and packed h per packet, wash ``r`` random
coded chunks and count exact decodes over many coefficient seeds.

    python scripts/fig2_coding.py --k 5 --k-prime 6 --h 3 --trials 2000
"""

import argparse
import random

from packetwash.rlnc import DecoderState, RlncGroup, rlnc_encode


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--k-prime", type=int, default=6)
    ap.add_argument("--chunk-len", type=int, default=100)
    ap.add_argument("--trials", type=int, default=2000)
    args = ap.parse_args()

    k, kp = args.k, args.k_prime
    print(f"k={k} k'={kp}: decode rate by number of washed chunks")
    for washed in range(kp + 1):
        ok = 0
        for seed in range(args.trials):
            rng = random.Random(seed)
            group = RlncGroup.from_chunks(0, [rng.randbytes(args.chunk_len) for _ in range(k)])
            coded = rlnc_encode(group, kp, rng_seed=seed)
            dec = DecoderState(k, args.chunk_len)
            for c in rng.sample(coded, kp - washed):
                dec.add(c)
            ok += dec.rank == k and dec.solve() == list(group.source_chunks)
        print(f"  washed {washed}: {ok / args.trials:7.2%}")


if __name__ == "__main__":
    main()
