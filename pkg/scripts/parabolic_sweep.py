"""Forbidden-run subsystem sweep for the Manneville-Pomeau map with F(x) = x.

Prints D per run length L and order k, showing the climb toward the flat
value 1 as the subsystems exhaust the map.

    python scripts/parabolic_sweep.py --alphas 0.05 0.3 0.9 --orders 6 8 10
"""
import argparse
import time

from birkspec.map_model import BranchSystem, discretize_analytic
from birkspec.spectrum_solver import theorem2_dimension


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.0, 0.05, 0.3, 0.6, 0.9])
    ap.add_argument("--orders", type=int, nargs="+", default=[6, 8, 10])
    ap.add_argument("--runs", type=int, nargs="+", default=[1, 2, 4, 8])
    args = ap.parse_args(argv)
    mp = BranchSystem.manneville_pomeau(args.gamma)
    f = discretize_analytic(mp, {"id": "coordinate"}, 1)
    print("k,alpha,L,D,status")
    for k in args.orders:
        t0 = time.perf_counter()
        for a in args.alphas:
            pt = theorem2_dimension(mp, f, a, k, runs=[L for L in args.runs if L <= k + 1])
            for e in pt.extras.get("sweep", [{"L": "-", "D": pt.D, "status": pt.status}]):
                L = "full" if e["L"] is None else e["L"]
                print(f"{k},{a:g},{L},{e['D']:.6f},{e['status']}")
        print(f"# k={k} took {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
