"""Batch driver: ``chernoff-subord {run,dump-kernel,verify,laplace-check}``.

Exit codes: 0 success, 1 verify failure, 2 validation error, 3 numeric guard,
4 budget exceeded.
"""

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import (BudgetExceeded, ConfigError, DomainError, NumericError,
                     TruncationWarning)
from .star_graph import StarGraphSpace
from .circle import CircleGrid

log = logging.getLogger("chernoff_subord")

SCHEMA_LINE = f"# chernoff-subord v{__version__} schema=1"
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3, 4


def _f(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _coord_cells(coords, i):
    out = []
    for k, v in coords.items():
        out.append(str(int(v[i])) if k == "edge" else _f(v[i]))
    return out


def _l2(space, err):
    return float(np.sqrt(np.sum(space.weights * err * err)))


def _load(args):
    overrides = list(args.set or [])
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.budget is not None:
        overrides.append(f"budget={args.budget}")
    return load_config(args.config, overrides)


def run_convergence(cfg, out_dir):
    """Run every n of ``n_list``; writes results, summary and manifest files."""
    from .config import build
    exp = build(cfg)
    raw = cfg.raw
    t, budget = float(raw["t"]), float(raw["budget"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = raw["output"]
    for n in raw["n_list"]:
        est = n * exp.family.cost(t / n)
        log.info("n=%d: estimated work %.3g (budget %.3g)", n, est, budget)
        if est > budget:
            raise BudgetExceeded(f"estimated work {est:.3g} for n={n} exceeds budget "
                                 f"{budget:.3g}", estimate=est, budget=budget)
    oracle = exp.oracle(t) if exp.oracle is not None else None
    results, summary = [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        from .engine import chernoff_iterate
        for n in raw["n_list"]:
            t0 = time.perf_counter()
            vals = chernoff_iterate(exp.family, t, n, exp.phi).values
            ms = 1e3 * (time.perf_counter() - t0)
            err = np.abs(vals - oracle) if oracle is not None else np.full_like(vals, np.nan)
            for i in range(len(vals)):
                results.append([str(n)] + _coord_cells(exp.coords, i) + [
                    _f(vals[i]), _f(oracle[i]) if oracle is not None else "nan", _f(err[i])])
            sup = float(np.max(err)) if oracle is not None else float("nan")
            l2 = _l2(exp.space, err) if oracle is not None else float("nan")
            summary.append((n, sup, l2, ms))
            log.info("n=%d sup_err=%.6e l2_err=%.6e (%.0f ms)", n, sup, l2, ms)
    _write_csv(out_dir / f"{stem}_results.csv",
               ["n"] + list(exp.coords) + ["value", "oracle_value", "abs_err"], results)
    _write_csv(out_dir / f"{stem}_summary.csv", ["n", "sup_err", "l2_err", "wall_time_ms"],
               [[str(n), _f(s), _f(l), f"{ms:.1f}"] for n, s, l, ms in summary])
    manifest = {
        "version": __version__,
        "schema": 1,
        "command": "run",
        "source": cfg.source,
        "config": cfg.resolved(),
        "law_residual": exp.sub.law_residual if exp.sub is not None else None,
        "truncation_warnings": sorted({str(w.message) for w in caught}),
        "outputs": [f"{stem}_results.csv", f"{stem}_summary.csv"],
    }
    with open(out_dir / f"{stem}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return summary


def dump_kernel(cfg, t, out_dir):
    """Write the step matrix at time t as (row, col, weight) plus row masses."""
    from .config import build
    exp = build(cfg)
    step, space = exp.step, exp.space
    mat = step.matrix(float(t))
    dense = mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.raw["output"]
    r, c = np.nonzero(dense)
    _write_csv(out_dir / f"{stem}_kernel.csv", ["row", "col", "weight"],
               [[str(i), str(j), _f(dense[i, j])] for i, j in zip(r, c)])
    header = ["row"] + list(exp.coords) + ["row_mass"]
    extra = None
    if isinstance(space, CircleGrid):
        # unnormalized kernel sums: the denominators of the normalized step
        th = space.theta
        K = step.kernel(float(t), th[:, None], th[None, :])
        extra = K.sum(axis=1)
        header.append("normalizer")
    if isinstance(space, StarGraphSpace):
        header.append("vertex_weight")
    mass = dense.sum(axis=1)
    rows = []
    for i in range(len(mass)):
        row = [str(i)] + _coord_cells(exp.coords, i) + [_f(mass[i])]
        if extra is not None:
            row.append(_f(extra[i]))
        if isinstance(space, StarGraphSpace):
            row.append(_f(dense[i, 0]))
        rows.append(row)
    _write_csv(out_dir / f"{stem}_kernel_rows.csv", header, rows)
    return mass


def laplace_check(out_dir=None, tol=1e-6):
    from .bernstein import laplace_residual
    from .verify import LAPLACE_T, LAPLACE_X
    from .subordinators import shipped_pairs
    rows, worst = [], 0.0
    for label, law, tr in shipped_pairs():
        for t in LAPLACE_T:
            for x in LAPLACE_X:
                res = laplace_residual(law, tr, t, x)
                worst = max(worst, res)
                rows.append([label, _f(t), _f(x), _f(res), "pass" if res < tol else "fail"])
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_csv(Path(out_dir) / "laplace_check.csv", ["pair", "t", "x", "residual", "status"],
                   rows)
    return worst < tol, worst, rows


def build_parser():
    p = argparse.ArgumentParser(prog="chernoff-subord",
                                description="Chernoff approximation of subordinate semigroups")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="experiment YAML file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override a config field (repeatable)")
            sp.add_argument("--threads", type=int)
            sp.add_argument("--budget", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("run", help="convergence study over n_list"))
    dk = sub.add_parser("dump-kernel", help="write the step kernel at time t")
    common(dk)
    dk.add_argument("--t", type=float, required=True)
    common(sub.add_parser("verify", help="run the invariant suite"), needs_config=False)
    common(sub.add_parser("laplace-check", help="Laplace residuals of shipped laws"),
           needs_config=False)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            from .verify import verify_suite
            ok, text, digest, timings = verify_suite(seed=args.seed or 0)
            sys.stdout.write(text)
            print(f"report sha256 {digest}  ({sum(timings.values()):.1f} s)")
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            (Path(args.out_dir) / "verify_report.txt").write_text(text)
            return EXIT_OK if ok else EXIT_VERIFY
        if args.command == "laplace-check":
            ok, worst, _ = laplace_check(args.out_dir)
            print(f"max Laplace residual {worst:.3e}: {'pass' if ok else 'fail'}")
            return EXIT_OK if ok else EXIT_NUMERIC
        cfg = _load(args)
        if args.command == "run":
            for n, sup, l2, ms in run_convergence(cfg, args.out_dir):
                print(f"n={n:<4d} sup_err={sup:.6e} l2_err={l2:.6e} {ms:9.1f} ms")
            return EXIT_OK
        mass = dump_kernel(cfg, args.t, args.out_dir)
        print(f"wrote {len(mass)} rows; row mass in [{mass.min():.9f}, {mass.max():.9f}]")
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericError as exc:
        print(f"numeric guard: {exc} (residual {exc.residual})", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
