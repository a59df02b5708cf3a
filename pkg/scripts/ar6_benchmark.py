"""Ensemble benchmark on the sixth-order autoregressive test process.

For each record length N the script simulates an ensemble of independent
realizations, estimates the averaging error with the multiscale fit and with
an MLE AR(3) baseline, and prints the ensemble statistics next to the exact
value from the Yule-Walker statistics.

    python3 scripts/ar6_benchmark.py --n-grid 512..16384 --ensemble 30
"""

import argparse
import math
import time

from avgerr.ar import PAPER_AR6, yule_walker_truth
from avgerr.experiments import benchmark, parse_grid
from avgerr.multiscale import FitConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-grid", default="512..16384")
    ap.add_argument("--ensemble", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--init", type=float, default=None,
                    help="common initial value for the recursion (default zeros)")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    stats = yule_walker_truth(PAPER_AR6, 8)
    print(f"# sigma={math.sqrt(stats.sigma2):.4f} rho(1..8)="
          + " ".join(f"{r:.4f}" for r in stats.rho[1:]))
    print(f"{'N':>7} {'eps':>11} {'ms mean':>11} {'ms sd':>11} {'mle mean':>11} {'mle sd':>11}")
    t0 = time.perf_counter()

    def show(row):
        print(f"{row.n:>7d} {row.truth:11.4e} {row.ms_mean:11.4e} {math.sqrt(row.ms_var):11.4e} "
              f"{row.mle_mean:11.4e} {math.sqrt(row.mle_var):11.4e}", flush=True)

    benchmark("ar", parse_grid(args.n_grid), args.ensemble, seed=args.seed,
              fit_config=FitConfig(m=args.m), init=args.init, jobs=args.jobs, on_row=show)
    print(f"# {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
