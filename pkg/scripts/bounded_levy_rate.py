"""First-order rate of the bounded-Levy family for mu = K delta_a.

n * sup_err tends to a constant; the Poisson series is the reference.

    python3 scripts/bounded_levy_rate.py [--n 4 8 ... 256]
"""

import argparse

import numpy as np

from chernoff_subord.bernstein import BernsteinTriplet, atomic_measure
from chernoff_subord.engine import (GaussianBump, SubordinationConfig, bounded_levy_family,
                                    chernoff_iterate, poisson_series_oracle)
from chernoff_subord.euclidean import DiffusionCoefficients, DiffusionStep, EuclideanGrid
from chernoff_subord.subordinators import CompoundPoisson


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128, 256])
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.1)
    args = p.parse_args()
    grid = EuclideanGrid.from_spacing(1, 20.0, args.h)
    step = DiffusionStep(grid, DiffusionCoefficients(), warn=False)
    x = grid.axis
    phi = np.exp(-x ** 2 / 2)
    mu = atomic_measure([(args.a, args.K)])
    cfg = SubordinationConfig(BernsteinTriplet(0.0, 0.0, mu), CompoundPoisson(mu),
                              allow_atomic=True)
    ref = poisson_series_oracle([(args.a, args.K)], GaussianBump().semigroup(x), phi, 1.0)
    for n in args.n:
        err = np.max(np.abs(chernoff_iterate(bounded_levy_family(cfg, step), 1.0, n,
                                             phi).values - ref))
        print(f"n={n:<4d} sup_err={err:.4e} n*err={n * err:.4f}")


if __name__ == "__main__":
    main()
