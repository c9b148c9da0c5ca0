"""Chordal kernel on the circle: grid error against the von Mises eigenvalue.

The normalized K3 step maps cos to (I_1(1/t) / I_0(1/t)) cos, so the
n-step error on cos at time 1 is |(I_1(n)/I_0(n))^n - e^{-1/2}|.

    python3 scripts/k3_calibration.py [--M 256]
"""

import argparse

import numpy as np
from scipy.special import ive

from chernoff_subord.circle import CircleGrid, CircleStep
from chernoff_subord.engine import chernoff_iterate, step_family


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--M", type=int, default=256)
    p.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    args = p.parse_args()
    grid = CircleGrid(args.M)
    phi = np.cos(grid.theta)
    exact = np.exp(-0.5) * phi
    for kernel in ("K1", "K3"):
        step = CircleStep(grid, kernel)
        for n in args.n:
            err = np.max(np.abs(chernoff_iterate(step_family(step), 1.0, n, phi).values - exact))
            line = f"{kernel} n={n:<3d} grid_err={err:.6e}"
            if kernel == "K3":
                lam = ive(1, n) / ive(0, n)
                line += f" von_mises={abs(lam ** n - np.exp(-0.5)):.6e}"
            print(line)


if __name__ == "__main__":
    main()
