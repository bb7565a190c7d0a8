"""Subspace accuracy as a function of the threshold tau.

Each stream is run once; the subspace is then re-derived from the window
recorded at each detection for every tau, so the sweep is cheap. Prints mean SAcc per tau over
Normal-M and HSphere streams with random change-subspace sizes.

    python3 scripts/tau_sweep.py --seeds 10
"""

import argparse

import numpy as np

from abcd.bench import match_detections, subspace_accuracy
from abcd.detector import ABCD, DetectorConfig, detect_subspace
from abcd.generators import gen_hsphere, gen_normal


class RecordingABCD(ABCD):
    """Keeps the window losses and local split seen at each detection."""

    def __init__(self, config):
        super().__init__(config)
        self.snapshots = []

    def _on_change(self, k, p):
        self.snapshots.append((self.window.view("losses").copy(), k))
        return super()._on_change(k, p)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--d", type=int, default=24)
    p.add_argument("--taus", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
    args = p.parse_args(argv)

    config = DetectorConfig()
    rng = np.random.default_rng(0)
    cases = []
    for seed in range(args.seeds):
        for make in (gen_normal, gen_hsphere):
            dstar = int(rng.integers(1, args.d + 1))
            stream = make(args.d, dstar, **({"n_concepts": 2} if make is gen_hsphere else {}), seed=seed)
            det = RecordingABCD(config)
            reports = det.run(stream.observations)
            first, _ = match_detections([r.t_detected for r in reports], [c.index for c in stream.changes], len(stream))
            for f, change in zip(first, stream.changes):
                if f is not None:
                    losses, k = det.snapshots[f]
                    cases.append((losses, k, change.subspace))

    print("tau,mean_sacc,n")
    for tau in args.taus:
        accs = []
        for losses, k, truth in cases:
            accs.append(subspace_accuracy(detect_subspace(losses, k, tau, config.M), truth, args.d))
        print(f"{tau},{np.mean(accs):.4f},{len(accs)}")


if __name__ == "__main__":
    main()
