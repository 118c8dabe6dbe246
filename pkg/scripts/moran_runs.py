"""Moran-set lower-bound runs: certificate and level-set convergence over seeds.

    python scripts/moran_runs.py thm1 --p 0.25 --alpha 0.25 --seeds 100
    python scripts/moran_runs.py thm2 --seeds 100 --n-max 8192
"""
import argparse
import time

import numpy as np

from birkspec.map_model import BranchSystem, discretize_analytic
from birkspec.measures import MarkovMeasure
from birkspec.moran_builder import (build_schedule_thm1, build_schedule_thm2, check_schedule,
                                    local_dimension_certificate, sample_moran_blocks, verify_level)
from birkspec.spectrum_solver import dual_dimension


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=["thm1", "thm2"])
    ap.add_argument("--p", type=float, default=0.25, help="Bernoulli weight of symbol 1 (thm1)")
    ap.add_argument("--alpha", type=float, default=None)
    ap.add_argument("--stages", type=int, default=None)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n-max", type=int, default=None)
    ap.add_argument("--base-alpha", type=float, default=0.05, help="Gibbs base measure location (thm2)")
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    if args.mode == "thm1":
        sys_ = BranchSystem.doubling()
        f = discretize_analytic(sys_, {"id": "digit_indicator", "j": 1}, 1)
        alpha = args.p if args.alpha is None else args.alpha
        sch = build_schedule_thm1(sys_, f, MarkovMeasure.bernoulli([args.p, 1 - args.p]), alpha,
                                  stages=args.stages or 2)
        n_max = args.n_max or 4096
    else:
        sys_ = BranchSystem.manneville_pomeau(0.5)
        f = discretize_analytic(sys_, {"id": "coordinate"}, 1)
        base = dual_dimension(sys_, f, args.base_alpha, 6).measure
        n_max = args.n_max or 8192
        sch = build_schedule_thm2(sys_, f, base, 0.0 if args.alpha is None else args.alpha,
                                  stages=args.stages or 12, n_target=n_max)
    seeds = list(range(args.seeds))
    samples = [sample_moran_blocks(sch, n_max, s) for s in seeds]
    rep = verify_level(sch, f, seeds, n_max, samples)
    cert = local_dimension_certificate(sch, sys_, f, seeds, n_max, samples)
    print("stage lengths:", sch.stage_lengths()[:12], "..." if len(sch.stages) > 12 else "")
    print("invariants:", {k: v for k, v in check_schedule(sch).items()})
    for c, col in zip(rep.checkpoints, rep.deviations.T):
        print(f"n={c:6d}  median deviation {np.median(col):.4f}  90% quantile {np.quantile(col, 0.9):.4f}")
    print(f"certificate median {cert.estimate:.4f}  target {cert.target:.4f}")
    print(f"elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
