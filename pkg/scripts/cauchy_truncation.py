"""Cauchy subordination on [-R, R]: how the error depends on R and n.

The heat step is the exact semigroup, so every n gives the same operator up
to rounding; what remains is the heavy Cauchy tail cut at the grid edge.

    python3 scripts/cauchy_truncation.py [--h 0.1] [--R 20 40 80]
"""

import argparse
import time

import numpy as np

from chernoff_subord.bernstein import BernsteinTriplet, stable_half_measure
from chernoff_subord.engine import (GaussianBump, SubordinationConfig, chernoff_iterate,
                                    subordinate_family, subordinate_oracle_exact)
from chernoff_subord.euclidean import DiffusionCoefficients, DiffusionStep, EuclideanGrid
from chernoff_subord.subordinators import StableHalf


def tail_mass(R, scale=1 / np.sqrt(2)):
    # mass of the Cauchy(scale) law outside [-R, R]
    return 1 - 2 / np.pi * np.arctan(R / scale)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--R", type=float, nargs="+", default=[20.0, 40.0, 80.0])
    p.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--window", type=float, default=5.0, help="report the error on |x| < window")
    args = p.parse_args()
    triplet = BernsteinTriplet(0.0, 0.0, stable_half_measure(1.0))
    law = StableHalf(1.0)
    print(f"{'R':>6} {'tail':>10} " + " ".join(f"{'n=' + str(n):>11}" for n in args.n))
    for R in args.R:
        t0 = time.perf_counter()
        grid = EuclideanGrid.from_spacing(1, R, args.h)
        step = DiffusionStep(grid, DiffusionCoefficients(), warn=False)
        x = grid.axis
        phi = np.exp(-x ** 2 / 2)
        oracle = subordinate_oracle_exact(law, GaussianBump().semigroup(x), 1.0, phi)
        cfg = SubordinationConfig(triplet, law)
        inner = np.abs(x) < args.window
        errs = []
        for n in args.n:
            v = chernoff_iterate(subordinate_family(cfg, step), 1.0, n, phi).values
            errs.append(np.max(np.abs(v - oracle)[inner]))
        print(f"{R:6.0f} {tail_mass(R):10.3e} " + " ".join(f"{e:11.4e}" for e in errs)
              + f"   ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
