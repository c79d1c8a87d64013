"""Convergence of the empirical VP drift to the closed-form mixture drift.

Prints the max relative error over a probe grid as the number of mixture
draws grows; the error should shrink roughly like n^{-1/2}.
"""

import argparse

import numpy as np

from dsbs.datasets import sample_gmm
from dsbs.drift import DriftEvaluator, GaussianMixture, gmm_drift_vp
from dsbs.metrics import drift_error_report
from dsbs.sde import ReferenceSde


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--sizes", default="1000,10000,100000,1000000")
    args = ap.parse_args(argv)

    mixtures = {
        "1-d bimodal": GaussianMixture([0.5, 0.5], [[2.0], [-2.0]], [0.25, 0.25]),
        "2-d three-component": GaussianMixture(
            [0.3, 0.5, 0.2],
            [[2.0, 0.0], [-1.0, 1.5], [0.0, -2.0]],
            [np.eye(2) * 0.3, [[0.5, 0.2], [0.2, 0.4]], np.eye(2) * 0.2],
        ),
    }
    probe_x = {"1-d bimodal": [[0.5], [-1.0], [1.5]], "2-d three-component": [[0.5, 0.5], [-1.0, -1.0], [1.5, -0.5]]}
    ts = np.arange(1, 10) / 10

    for name, gmm in mixtures.items():
        sde = ReferenceSde.vp(gmm.dim, args.tau)
        probes = [(np.array(x, dtype=float), t) for x in probe_x[name] for t in ts]
        oracle = lambda x, t: gmm_drift_vp(gmm, sde, None, x, t)
        print(f"{name} (tau={args.tau:g})")
        for n in map(int, args.sizes.split(",")):
            errs = []
            for seed in range(args.seeds):
                ev = DriftEvaluator(sde, sample_gmm(gmm, n, seed=seed))
                errs.append(drift_error_report(ev, oracle, probes))
            worst = max(e["max_rel_error"] for e in errs)
            mean = np.mean([e["mean_rel_error"] for e in errs])
            print(f"  n={n:>8d}  max rel {worst:.4f}  mean rel {mean:.4f}")


if __name__ == "__main__":
    main()
