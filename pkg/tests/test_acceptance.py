"""Acceptance criteria A1-A8 at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary (and
by running this file directly). Criteria that fail at their stated
tolerance for structural reasons are marked xfail(strict=True): they are
computed in full and asserted as written, so they turn into an XPASS error
if they ever start passing.
"""

import time

import numpy as np
import pytest
from scipy.special import voigt_profile

from chernoff_subord.bernstein import BernsteinTriplet, atomic_measure, stable_half_measure
from chernoff_subord.circle import CircleGrid, CircleStep
from chernoff_subord.engine import (GaussianBump, SubordinationConfig, bounded_levy_family,
                                    chernoff_iterate, poisson_series_oracle,
                                    subordinate_family, subordinate_oracle_exact,
                                    subordinated_fourier_oracle)
from chernoff_subord.euclidean import DiffusionCoefficients, DiffusionStep, EuclideanGrid
from chernoff_subord.star_graph import (BoundaryWeights, GraphCoefficients, StarGraphSpace,
                                        StarGraphStep, g_beta_gamma, kernel_mass,
                                        reflected_kernel, transition_kernel)
from chernoff_subord.steps import generator_probe
from chernoff_subord.subordinators import CompoundPoisson, StableHalf, shipped_pairs
from chernoff_subord.bernstein import laplace_residual
from chernoff_subord.verify import LAPLACE_T, LAPLACE_X, verify_suite

N_LIST = (4, 8, 16, 32)
# sup|[F_3(1/32)]^32 cos - e^{-1/2} cos| from the von Mises eigenvalue
# (I_1(32)/I_0(32))^32 - e^{-1/2}; the M = 256 grid reproduces it to 1e-15
K3_THRESHOLD = 4.87e-3


def _record(log, name, ok, detail, elapsed):
    log.append(f"{name} {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.1f} s)")


def _nonincreasing(errs, slack=0.0):
    return all(b <= a + slack for a, b in zip(errs, errs[1:]))


def _heat_line(R, h):
    grid = EuclideanGrid.from_spacing(1, R, h)
    return grid, DiffusionStep(grid, DiffusionCoefficients(), warn=False)


@pytest.mark.xfail(strict=True, reason="R = 20 truncates the Cauchy tail; see decisions")
def test_a1_cauchy(acceptance_log):
    t0 = time.perf_counter()
    grid, step = _heat_line(20.0, 0.05)
    x = grid.axis
    phi = np.exp(-x ** 2 / 2)
    triplet = BernsteinTriplet(0.0, 0.0, stable_half_measure(1.0))
    law = StableHalf(1.0)
    cfg = SubordinationConfig(triplet, law, eta_nodes=64, threads=1)
    oracle = subordinate_oracle_exact(law, GaussianBump().semigroup(x), 1.0, phi)
    fourier = subordinated_fourier_oracle(triplet, GaussianBump().fourier, x, 1.0)
    self_consistency = float(np.max(np.abs(oracle - fourier)))
    # third route: Gaussian * Cauchy(scale 1/sqrt 2) is a Voigt profile
    voigt = np.sqrt(2 * np.pi) * voigt_profile(x, 1.0, 1 / np.sqrt(2))
    assert np.max(np.abs(fourier - voigt)) < 1e-12
    errs = [float(np.max(np.abs(chernoff_iterate(subordinate_family(cfg, step), 1.0, n,
                                                 phi).values - oracle))) for n in N_LIST]
    bound = max(2 * self_consistency, 1e-3)
    ok = _nonincreasing(errs) and errs[-1] <= bound
    _record(acceptance_log, "A1", ok,
            "sup_err(n=4..32) " + " ".join(f"{e:.4e}" for e in errs)
            + f"; bound {bound:.1e}; oracle self-consistency {self_consistency:.1e}",
            time.perf_counter() - t0)
    assert self_consistency < 1e-8
    assert _nonincreasing(errs)
    assert errs[-1] <= bound


@pytest.mark.xfail(strict=True, reason="first-order Chernoff error of F_mu is 0.043/n; "
                                       "see decisions")
def test_a2_bounded_levy(acceptance_log):
    t0 = time.perf_counter()
    grid, step = _heat_line(20.0, 0.05)
    x = grid.axis
    phi = np.exp(-x ** 2 / 2)
    mu = atomic_measure([(1.0, 1.0)])
    cfg = SubordinationConfig(BernsteinTriplet(0.0, 0.0, mu), CompoundPoisson(mu),
                              allow_atomic=True)
    oracle = poisson_series_oracle([(1.0, 1.0)], GaussianBump().semigroup(x), phi, 1.0)
    assert CompoundPoisson(mu).atoms(1.0)[2] < 1e-12
    a = chernoff_iterate(bounded_levy_family(cfg, step), 1.0, 32, phi).values
    b = chernoff_iterate(subordinate_family(cfg, step), 1.0, 32, phi).values
    ea, eb = (float(np.max(np.abs(v - oracle))) for v in (a, b))
    dab = float(np.max(np.abs(a - b)))
    ok_err, ok_dist = ea <= 1e-3, dab <= ea + eb
    _record(acceptance_log, "A2", ok_err and ok_dist,
            f"sup_err(F_mu, n=32) {ea:.4e} (bound 1e-3); d(F, F_mu) {dab:.4e} <= "
            f"{ea + eb:.4e}: {ok_dist}", time.perf_counter() - t0)
    assert ok_dist
    assert ok_err


def test_a3_star_graph_kernel(acceptance_log):
    t0 = time.perf_counter()
    w1 = BoundaryWeights(0.0, 0.0, (1.0,))
    space = StarGraphSpace(1, 12.0, 240)
    y = np.concatenate([[0.0], space.x_edge])
    worst = 0.0
    for t in (0.25, 1.0):
        for x in space.x_edge[::10]:
            dens, atom = transition_kernel(w1, t, (0, x), space)
            ref = reflected_kernel(t, x, y)
            keep = ref > 1e-300
            worst = max(worst, float(np.max(np.abs(dens[0][keep] - ref[keep]) / ref[keep])))
            assert atom == 0.0
    w3 = BoundaryWeights(0.0, 0.0, (1 / 3, 1 / 3, 1 / 3))
    space3 = StarGraphSpace(3, 12.0, 240)
    masses = [kernel_mass(space3, *transition_kernel(w3, t, xi, space3))
              for t in (0.25, 1.0) for xi in ("v", (0, 0.5), (1, 2.0), (2, 4.0))]
    ok = worst <= 1e-6 and all(1 - 1e-5 <= m <= 1 + 1e-6 for m in masses)
    _record(acceptance_log, "A3", ok,
            f"reflected kernel rel err {worst:.2e}; d=3 mass in "
            f"[{min(masses):.8f}, {max(masses):.8f}]", time.perf_counter() - t0)
    assert ok


def _g_brute(beta, gamma, t, z, panels=10 ** 6):
    # midpoint rule on the defining s-integral over (0, t)
    s = (np.arange(panels) + 0.5) * (t / panels)
    a = s + gamma * z
    f = a / (t - s) ** 1.5 * np.exp(-a * a / (2 * gamma ** 2 * (t - s))) \
        * np.exp(-beta * s / gamma)
    return f.sum() * (t / panels) / (gamma ** 2 * np.sqrt(2 * np.pi))


def test_a4_g_quadrature(acceptance_log):
    t0 = time.perf_counter()
    rel = []
    for z in (0.0, 0.5, 1.0):
        v = g_beta_gamma(0.0, 1.0, 1.0, z)
        ref = _g_brute(0.0, 1.0, 1.0, z)
        rel.append(abs(v - ref) / ref)
    ok = max(rel) <= 1e-6
    _record(acceptance_log, "A4", ok, "rel err at z=0,0.5,1: "
            + " ".join(f"{r:.2e}" for r in rel), time.perf_counter() - t0)
    assert ok


def test_a5_circle(acceptance_log):
    t0 = time.perf_counter()
    grid = CircleGrid(256)
    phi = np.cos(grid.theta)
    ref = np.exp(-0.5) * phi
    out, ok = {}, True
    for kernel, bound in (("K1", 5e-3), ("K3", K3_THRESHOLD)):
        step = CircleStep(grid, kernel)
        errs = [float(np.max(np.abs(chernoff_iterate(step.apply, 1.0, n, phi).values - ref)))
                for n in N_LIST]
        # K1 is exact up to wrap-around, so its later errors are roundoff
        good = _nonincreasing(errs, slack=1e-14) and errs[-1] <= bound
        ok &= good
        out[kernel] = (errs, bound)
    _record(acceptance_log, "A5", ok, "; ".join(
        f"{k} " + " ".join(f"{e:.3e}" for e in errs) + f" (bound {b:.2e})"
        for k, (errs, b) in out.items()), time.perf_counter() - t0)
    assert ok


def test_a6_generator_probes(acceptance_log):
    t0 = time.perf_counter()
    t = 1e-3
    res = {}
    # R^1 diffusion with variable A, B, C on phi = exp(-x^2)
    grid = EuclideanGrid.from_spacing(1, 8.0, 0.05)
    x = grid.axis
    A = lambda x: 1 + 0.3 * np.sin(x)
    B = lambda x: 0.5 * np.cos(x)
    C = lambda x: 0.2 + 0.1 * x * x / (1 + x * x)
    step = DiffusionStep(grid, DiffusionCoefficients(lambda p: A(p[:, 0]),
                                                     lambda p: B(p[:, 0]),
                                                     lambda p: C(p[:, 0])), warn=False)
    phi = np.exp(-x * x)
    d1, d2 = -2 * x * phi, (4 * x * x - 2) * phi
    gen = 0.5 * A(x) * d2 + B(x) * d1 - C(x) * phi
    res["R^1"] = float(np.max(np.abs(generator_probe(step, phi, t) - gen)))
    # star graph interior: phi supported away from the vertex on edge 0
    w = BoundaryWeights(0.1, 0.2, (0.4, 0.3))
    space = StarGraphSpace(2, 10.0, 200)
    gstep = StarGraphStep(space, w, GraphCoefficients(1.0, 0.0, 0.0), warn=False)
    xe, edge = space.x_of, space.edge_of
    bump = np.where(edge == 0, np.exp(-2 * (xe - 4) ** 2), 0.0)
    gen_g = np.where(edge == 0, 0.5 * (16 * (xe - 4) ** 2 - 4) * bump, 0.0)
    res["star graph"] = float(np.max(np.abs(generator_probe(gstep, bump, t) - gen_g)))
    # circle, both kernels
    cg = CircleGrid(256)
    th = cg.theta
    cphi = np.exp(np.cos(th))
    lap = 0.5 * (np.sin(th) ** 2 - np.cos(th)) * cphi
    for kernel in ("K1", "K3"):
        res[f"circle {kernel}"] = float(np.max(np.abs(
            generator_probe(CircleStep(cg, kernel), cphi, t) - lap)))
    ok = all(v <= 1e-2 for v in res.values())
    _record(acceptance_log, "A6", ok, "; ".join(f"{k} {v:.2e}" for k, v in res.items()),
            time.perf_counter() - t0)
    assert ok


def test_a7_invariant_suite(acceptance_log):
    t0 = time.perf_counter()
    ok, text, digest, timings = verify_suite(seed=0)
    elapsed = time.perf_counter() - t0
    n_fail = text.count("FAIL")
    _record(acceptance_log, "A7", ok and elapsed < 60,
            f"{len(timings)} checks, {n_fail} failed, report {digest[:12]}", elapsed)
    assert ok, text
    assert elapsed < 60


def test_a8_laplace(acceptance_log):
    t0 = time.perf_counter()
    worst = max(laplace_residual(law, tr, t, x)
                for _, law, tr in shipped_pairs() for t in LAPLACE_T for x in LAPLACE_X)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 10
    _record(acceptance_log, "A8", ok, f"max residual {worst:.2e} over "
            f"{len(shipped_pairs())} pairs", elapsed)
    assert ok


if __name__ == "__main__":
    log = []
    for name, fn in sorted(globals().items()):
        if name.startswith("test_a"):
            try:
                fn(log)
            except AssertionError:
                pass
    print("\n".join(log))
