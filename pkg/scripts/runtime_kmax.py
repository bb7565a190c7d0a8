"""Per-observation processing time as the window grows, for several k_max.

Feeds a stationary stream (no detections, so the window only grows) and
reports the mean time per observation in consecutive blocks, one column per
k_max. With n_max unset the window reaches the full stream length; the time
per observation should still stay flat because only k_max splits are scored.

    python3 scripts/runtime_kmax.py --len 20000 --kmax 20 50 100
"""

import argparse
import time

import numpy as np

from abcd.detector import ABCD, DetectorConfig


def block_means(config, X, block):
    det = ABCD(config)
    lat = np.empty(len(X))
    for i, x in enumerate(X):
        t0 = time.perf_counter()
        det.process(x)
        lat[i] = time.perf_counter() - t0
    n = len(X) // block
    return lat[: n * block].reshape(n, block).mean(axis=1), len(det.window)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--len", type=int, default=20000)
    p.add_argument("--d", type=int, default=24)
    p.add_argument("--kmax", type=int, nargs="+", default=[20, 50, 100])
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--block", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    X = np.random.default_rng(args.seed).uniform(size=(args.len, args.d))
    cols = {}
    for k in args.kmax:
        means, final = block_means(DetectorConfig(k_max=k, n_max=args.nmax), X, args.block)
        cols[k] = means
        print(f"# k_max={k}: final window {final}")
    print("block_end," + ",".join(f"kmax_{k}_us" for k in args.kmax))
    for b in range(len(next(iter(cols.values())))):
        print(f"{(b + 1) * args.block}," + ",".join(f"{cols[k][b] * 1e6:.1f}" for k in args.kmax))


if __name__ == "__main__":
    main()
