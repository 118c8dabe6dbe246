"""Digit-frequency spectra of affine two-branch maps against their closed forms.

    python scripts/spectrum_arch.py --k 1 2 --num 21
"""
import argparse
import math

import numpy as np

from birkspec.map_model import BranchSystem, discretize_analytic
from birkspec.spectrum_solver import dual_dimension, primal_dimension


def closed_form(a, lengths):
    if a in (0.0, 1.0):
        return 0.0
    h = -a * math.log(a) - (1 - a) * math.log(1 - a)
    lam = -a * math.log(lengths[0]) - (1 - a) * math.log(lengths[1])
    return h / lam


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--num", type=int, default=21)
    ap.add_argument("--lengths", type=float, nargs=2, action="append",
                    help="branch lengths; repeatable (default: 1/2 1/2 and 1/4 3/4)")
    args = ap.parse_args(argv)
    families = args.lengths or [[0.5, 0.5], [0.25, 0.75]]
    grid = np.linspace(0.0, 1.0, args.num)
    print("lengths,k,alpha,dual,primal,closed_form,dual_err")
    for lengths in families:
        sys_ = BranchSystem.linear_lengths(lengths)
        f = discretize_analytic(sys_, {"id": "digit_indicator", "j": 1}, 1)
        for k in args.k:
            for a in grid:
                du = dual_dimension(sys_, f, a, k).D
                pr = primal_dimension(sys_, f, a, k).D
                ref = closed_form(a, lengths)
                print(f"{lengths[0]:g}/{lengths[1]:g},{k},{a:.4f},{du:.6f},{pr:.6f},{ref:.6f},{abs(du - ref):.1e}")


if __name__ == "__main__":
    main()
