"""Run every shipped config and print sup errors with observed orders.

    python3 scripts/convergence_study.py [--out-dir out/study] [configs/*.yaml]
"""

import argparse
import logging
import math
from pathlib import Path

from chernoff_subord.cli import run_convergence
from chernoff_subord.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser()
    p.add_argument("configs", nargs="*", type=Path)
    p.add_argument("--out-dir", default="out/study")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)
    paths = args.configs or sorted((ROOT / "configs").glob("*.yaml"))
    for path in paths:
        cfg = load_config(path)
        summary = run_convergence(cfg, args.out_dir)
        print(f"{path.stem}")
        prev = None
        for n, sup, l2, ms in summary:
            order = ""
            if prev is not None and sup > 0 and prev[1] > 0:
                order = f"order {math.log(prev[1] / sup) / math.log(n / prev[0]):5.2f}"
            print(f"  n={n:<4d} sup={sup:.4e} l2={l2:.4e} {ms:8.0f} ms  {order}")
            prev = (n, sup)


if __name__ == "__main__":
    main()
