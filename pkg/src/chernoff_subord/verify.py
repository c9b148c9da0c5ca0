"""Invariant suite across all modules at small sizes.

Each check returns (ok, detail). The report is plain text; its hash covers the
check names, verdicts and details (no timings), so two runs with the same
seed produce the same hash.
"""

import hashlib
import time
import warnings

import numpy as np

from .bernstein import (BernsteinTriplet, atomic_measure, closed_form_bernstein,
                        eval_bernstein, exponential_jump_measure, gamma_measure,
                        inverse_gaussian_measure, laplace_residual, stable_half_measure)
from .circle import CircleGrid, CircleStep, normalized_step
from .engine import (SubordinationConfig, bounded_levy_family, chernoff_iterate,
                     GaussianBump, m_default, poisson_series_oracle, subordinate_family,
                     subordinate_step, bounded_levy_step)
from .errors import TruncationWarning
from .euclidean import DiffusionCoefficients, DiffusionStep, EuclideanGrid
from .star_graph import (BoundaryWeights, StarGraphSpace, StarGraphStep, g_beta_gamma,
                         make_vertex_kernel, reflected_kernel, row_mass,
                         transition_kernel)
from .subordinators import (CompoundPoisson, GammaLaw, InverseGaussian, StableHalf,
                            build_quadrature, make_law, shipped_pairs)

LAPLACE_T = (0.1, 1.0, 5.0)
LAPLACE_X = (0.1, 1.0, 10.0)


def _fmt(x):
    return f"{x:.3e}"


# -- bernstein ----------------------------------------------------------------

def check_bernstein_shape(seed):
    z = np.linspace(0.0, 20.0, 81)
    worst_inc, worst_conc = 0.0, 0.0
    for mu in (stable_half_measure(), gamma_measure(), inverse_gaussian_measure(),
               exponential_jump_measure()):
        f = eval_bernstein(BernsteinTriplet(0.3, 0.5, mu), z)
        worst_inc = min(worst_inc, np.diff(f).min())
        worst_conc = max(worst_conc, np.diff(f, 2).max())
    ok = worst_inc >= -1e-10 and worst_conc <= 1e-9
    return ok, f"min diff {_fmt(worst_inc)}, max second diff {_fmt(worst_conc)}"


def check_bernstein_at_zero(seed):
    err = max(abs(eval_bernstein(BernsteinTriplet(s, 1.0, mu), 0.0) - s)
              for s in (0.0, 0.7) for mu in (gamma_measure(), stable_half_measure()))
    return err == 0.0, f"max |f(0) - sigma| {_fmt(err)}"


def check_laplace(seed):
    res = max(laplace_residual(law, tr, t, x)
              for _, law, tr in shipped_pairs() for t in LAPLACE_T for x in LAPLACE_X)
    return res < 1e-6, f"max residual {_fmt(res)}"


# -- subordinators ------------------------------------------------------------

def check_cp_convolution(seed):
    law = make_law("compound-poisson", atoms=[[1.0, 0.7], [2.5, 0.4]])
    la, ma, _ = law.atoms(0.3)
    lb, mb, _ = law.atoms(0.5)
    lc, mc, trunc = law.atoms(0.8)
    conv = {}
    for s1, w1 in zip(la, ma):
        for s2, w2 in zip(lb, mb):
            key = round(s1 + s2, 9)
            conv[key] = conv.get(key, 0.0) + w1 * w2
    exact = {round(s, 9): w for s, w in zip(lc, mc)}
    err = max(abs(conv.get(k, 0.0) - exact.get(k, 0.0)) for k in set(conv) | set(exact))
    return err < 1e-11, f"max atom difference {_fmt(err)}"


def check_quadrature_positive(seed):
    worst = np.inf
    bad = 0
    for law in (StableHalf(1.0), InverseGaussian(1.0, 1.0), GammaLaw(1.0),
                make_law("compound-poisson", atoms=[[1.0, 1.0]])):
        for t in (0.05, 1.0):
            q = build_quadrature(law, t, 64)
            worst = min(worst, q.weights.min())
            bad += int(np.any(q.nodes < 0))
    return worst >= 0 and bad == 0, f"min weight {_fmt(worst)}, nodes outside support {bad}"


# -- euclidean ----------------------------------------------------------------

def _euclid(coeffs=None, R=8.0, h=0.1):
    grid = EuclideanGrid.from_spacing(1, R, h)
    return grid, DiffusionStep(grid, coeffs or DiffusionCoefficients(), warn=False)


def check_euclid_contraction(seed):
    rng = np.random.default_rng(seed)
    coeffs = DiffusionCoefficients(A=lambda x: 1 + 0.5 * np.sin(x), B=lambda x: 0.3 * np.cos(x),
                                   C=0.2)
    grid, step = _euclid(coeffs)
    inner = grid.interior(0.5)
    worst_c, worst_p, worst_one = 0.0, 0.0, 0.0
    for t in (1e-4, 1e-2, 0.1):
        phi = rng.uniform(-1, 1, grid.size)
        out = step.apply(t, phi)
        worst_c = max(worst_c, np.max(np.abs(out[inner])) / np.max(np.abs(phi)) - 1)
        worst_p = min(worst_p, step.apply(t, np.abs(phi)).min())
        one = DiffusionStep(grid, DiffusionCoefficients(A=coeffs.A, B=coeffs.B), warn=False)
        worst_one = max(worst_one, np.max(np.abs(one.apply(t, np.ones(grid.size))[inner] - 1)))
    ok = worst_c <= 1e-6 and worst_p >= -1e-12 and worst_one <= 1e-6
    return ok, (f"contraction excess {_fmt(worst_c)}, min of F(t)|phi| {_fmt(worst_p)}, "
                f"constant defect {_fmt(worst_one)}")


def check_euclid_exactness(seed):
    grid, step = _euclid()
    phi = np.exp(-grid.axis ** 2 / 2)
    outs = [chernoff_iterate(step.apply, 1.0, n, phi).values for n in (1, 4, 16)]
    spread = max(np.max(np.abs(o - outs[0])) for o in outs)
    ident = np.max(np.abs(step.apply(0.0, phi) - phi))
    return spread < 1e-6 and ident == 0, f"n-spread {_fmt(spread)}, F(0) defect {_fmt(ident)}"


# -- star graph ---------------------------------------------------------------

def check_g_monotone(seed, g_func=None):
    g_func = g_func or g_beta_gamma
    z = np.linspace(0.0, 6.0, 25)
    worst = -np.inf
    # monotone in z only without vertex killing; for beta > 0 it need not be
    for beta, gamma, t in ((0.0, 1.0, 1.0), (0.0, 0.5, 0.3), (0.0, 2.0, 2.0), (0.0, 0.1, 1.0)):
        vals = np.array([g_func(beta, gamma, t, zi) for zi in z])
        worst = max(worst, np.diff(vals).max())
        if vals.min() < 0:
            worst = max(worst, -vals.min())
    return worst <= 1e-12, f"max increase along z {_fmt(worst)}"


def check_graph_mass(seed):
    """Exact kernel masses, and row sums of the discretized step."""
    worst_hi, worst_one, worst_dn = 0.0, 0.0, 0.0
    cases = [BoundaryWeights(0.0, 0.0, (1 / 3, 1 / 3, 1 / 3)),
             BoundaryWeights(0.2, 0.3, (0.25, 0.25)),
             BoundaryWeights(0.0, 0.4, (0.6,)),
             BoundaryWeights(0.3, 0.7, (0.0, 0.0))]
    for w in cases:
        space = StarGraphSpace(w.d, 12.0, 120)
        G = make_vertex_kernel(w, 3 * space.R + 1, space.h / 4)
        step = StarGraphStep(space, w, warn=False)
        inner = space.interior(0.5)
        for t in (0.1, 1.0):
            for k, x in ((-1, 0.0), (0, 0.5), (w.d - 1, 2.0)):
                mass = row_mass(w, G, t, k, x)
                worst_hi = max(worst_hi, mass - 1)
                if w.a == 0:
                    worst_one = max(worst_one, abs(mass - 1))
                dens, _ = transition_kernel(w, t, (k, x), space)
                worst_dn = min(worst_dn, dens.min())
            sums = np.asarray(step.matrix(t).sum(axis=1)).ravel()[inner]
            worst_hi = max(worst_hi, sums.max() - 1)
            if w.a == 0:
                worst_one = max(worst_one, np.max(np.abs(sums - 1)))
    ok = worst_hi <= 1e-6 and worst_one <= 1e-5 and worst_dn >= -1e-12
    return ok, (f"mass excess {_fmt(worst_hi)}, a=0 mass defect {_fmt(worst_one)}, "
                f"min density {_fmt(worst_dn)}")


def check_graph_symmetry(seed):
    w = BoundaryWeights(0.0, 0.0, (1 / 3, 1 / 3, 1 / 3))
    space = StarGraphSpace(3, 10.0, 50)
    d0, a0 = transition_kernel(w, 0.5, (0, 1.0), space)
    d1, a1 = transition_kernel(w, 0.5, (1, 1.0), space)
    perm = d1[[1, 0, 2]]
    err = max(np.max(np.abs(perm - d0)), abs(a0 - a1))
    return err < 1e-12, f"permutation defect {_fmt(err)}"


def check_graph_contraction(seed):
    rng = np.random.default_rng(seed)
    w = BoundaryWeights(0.1, 0.2, (0.4, 0.3))
    space = StarGraphSpace(2, 10.0, 80)
    step = StarGraphStep(space, w, warn=False)
    inner = space.interior(0.5)
    worst = 0.0
    for t in (1e-3, 0.1, 1.0):
        phi = rng.uniform(-1, 1, space.size)
        worst = max(worst, np.max(np.abs(step.apply(t, phi)[inner])) - np.max(np.abs(phi)))
    return worst <= 1e-6, f"contraction excess {_fmt(worst)}"


def check_reflected(seed):
    w = BoundaryWeights(0.0, 0.0, (1.0,))
    space = StarGraphSpace(1, 12.0, 240)
    worst = 0.0
    for t in (0.25, 1.0):
        for x in (0.0, 0.5, 2.0):
            dens, atom = transition_kernel(w, t, (0, x), space)
            ref = reflected_kernel(t, x, np.concatenate([[0.0], space.x_edge]))
            keep = ref > 1e-280
            worst = max(worst, np.max(np.abs(dens[0][keep] - ref[keep]) / ref[keep]))
    return worst <= 1e-6, f"max relative error {_fmt(worst)}"


# -- circle -------------------------------------------------------------------

def check_circle_contraction(seed):
    rng = np.random.default_rng(seed)
    grid = CircleGrid(128)
    worst_c, worst_one = 0.0, 0.0
    for kernel in ("K1", "K3"):
        for t in (1e-4, 0.05, 1.0):
            phi = rng.uniform(-1, 1, grid.M)
            out = normalized_step(kernel, t, phi, grid)
            worst_c = max(worst_c, np.max(np.abs(out)) - np.max(np.abs(phi)))
            worst_one = max(worst_one, np.max(np.abs(normalized_step(kernel, t, np.ones(grid.M),
                                                                     grid) - 1)))
    return worst_c <= 1e-12 and worst_one <= 1e-14, \
        f"contraction excess {_fmt(worst_c)}, constant defect {_fmt(worst_one)}"


def check_circle_rotation(seed):
    rng = np.random.default_rng(seed)
    grid = CircleGrid(128)
    phi = rng.uniform(-1, 1, grid.M)
    worst = 0.0
    for kernel in ("K1", "K3"):
        for shift in (5, 37):
            a = normalized_step(kernel, 0.3, np.roll(phi, shift), grid)
            b = np.roll(normalized_step(kernel, 0.3, phi, grid), shift)
            worst = max(worst, np.max(np.abs(a - b)))
    return worst <= 1e-10, f"equivariance defect {_fmt(worst)}"


def check_circle_probes(seed):
    grid = CircleGrid(256)
    th = grid.theta
    phi = np.exp(np.cos(th))
    lap = 0.5 * (np.sin(th) ** 2 - np.cos(th)) * phi
    errs = {}
    for kernel in ("K1", "K3"):
        errs[kernel] = [np.max(np.abs((normalized_step(kernel, t, phi, grid) - phi) / t - lap))
                        for t in (1e-2, 1e-3)]
    ok = all(e[1] < e[0] and e[1] < 1e-2 for e in errs.values())
    return ok, ", ".join(f"{k} {_fmt(e[0])} -> {_fmt(e[1])}" for k, e in errs.items())


# -- engine -------------------------------------------------------------------

def _heat_setup(R=10.0, h=0.1):
    grid, step = _euclid(R=R, h=h)
    return grid, step, np.exp(-grid.axis ** 2 / 2)


def check_contraction_cascade(seed):
    grid, step, phi = _heat_setup()
    sup = np.max(np.abs(phi))
    cfg = SubordinationConfig(BernsteinTriplet(0.2, 0.5, gamma_measure()), GammaLaw(1.0))
    worst_f = max(np.max(np.abs(subordinate_step(cfg, step, t, phi))) - sup
                  for t in (0.01, 0.3))
    K = 1.5
    mu = atomic_measure([(1.0, K)])
    cfg_mu = SubordinationConfig(BernsteinTriplet(0.0, 0.0, mu),
                                 CompoundPoisson(mu), allow_atomic=True)
    worst_mu = max(np.max(np.abs(bounded_levy_step(cfg_mu, step, t, phi)))
                   - np.exp(2 * t * K) * sup for t in (0.01, 0.3))
    ok = worst_f <= 1e-6 and worst_mu <= 1e-6
    return ok, f"F excess {_fmt(worst_f)}, F_mu excess over e^(2tK) {_fmt(worst_mu)}"


def check_strong_continuity(seed):
    grid, step, phi = _heat_setup()
    cfg = SubordinationConfig(BernsteinTriplet(0.1, 0.5, inverse_gaussian_measure()),
                              InverseGaussian(1.0, 1.0))
    d = [np.max(np.abs(subordinate_step(cfg, step, t, phi) - phi)) for t in (0.1, 0.01, 0.001)]
    ok = d[0] > d[1] > d[2] and d[2] < 5e-3
    return ok, " -> ".join(_fmt(v) for v in d)


def check_schedule(seed):
    ts = np.geomspace(1e-4, 10, 200)
    ms = [m_default(t) for t in ts]
    ok = all(b <= a for a, b in zip(ms, ms[1:])) and m_default(1e-4) == 10000 \
        and m_default(5.0) == 1 and m_default(5.0, mode="unclamped") == 0
    return ok, f"m(1e-4)={ms[0]}, m(10)={ms[-1]}"


def _bounded_scenario():
    grid, step, phi = _heat_setup(R=12.0, h=0.1)
    x = grid.axis
    mu = atomic_measure([(1.0, 1.0)])
    cfg = SubordinationConfig(BernsteinTriplet(0.0, 0.0, mu), CompoundPoisson(mu),
                              allow_atomic=True)
    ref = poisson_series_oracle([(1.0, 1.0)], GaussianBump().semigroup(x), phi, 1.0)
    return cfg, step, phi, ref


def check_equivalence(seed):
    cfg, step, phi, ref = _bounded_scenario()
    a = chernoff_iterate(bounded_levy_family(cfg, step), 1.0, 32, phi).values
    b = chernoff_iterate(subordinate_family(cfg, step), 1.0, 32, phi).values
    ea, eb, dab = (np.max(np.abs(v)) for v in (a - ref, b - ref, a - b))
    return dab <= ea + eb, f"distance {_fmt(dab)} vs error sum {_fmt(ea + eb)}"


def check_monotone_bounded(seed):
    cfg, step, phi, ref = _bounded_scenario()
    errs = [np.max(np.abs(chernoff_iterate(bounded_levy_family(cfg, step), 1.0, n,
                                           phi).values - ref)) for n in (4, 8, 16, 32)]
    ok = all(b <= a for a, b in zip(errs, errs[1:]))
    return ok, " -> ".join(_fmt(e) for e in errs)


def check_monotone_circle(seed):
    grid = CircleGrid(256)
    phi = np.cos(grid.theta)
    ref = np.exp(-0.5) * phi
    out = []
    for kernel in ("K1", "K3"):
        step = CircleStep(grid, kernel)
        errs = [np.max(np.abs(chernoff_iterate(step.apply, 1.0, n, phi).values - ref))
                for n in (4, 8, 16, 32)]
        # K1 is exact up to wrap-around, so its errors sit at roundoff
        ok = all(b <= a + 1e-14 for a, b in zip(errs, errs[1:]))
        out.append((kernel, ok, errs))
    return all(o[1] for o in out), "; ".join(
        f"{k} " + " -> ".join(_fmt(e) for e in errs) for k, _, errs in out)


CHECKS = [
    ("bernstein: nondecreasing and concave", check_bernstein_shape),
    ("bernstein: f(0) = sigma", check_bernstein_at_zero),
    ("bernstein: Laplace residuals of shipped pairs", check_laplace),
    ("subordinators: compound-Poisson convolution", check_cp_convolution),
    ("subordinators: positive quadrature", check_quadrature_positive),
    ("euclidean: contraction, positivity, constants", check_euclid_contraction),
    ("euclidean: exact for constant coefficients", check_euclid_exactness),
    ("star graph: g_0,gamma nonincreasing in z", check_g_monotone),
    ("star graph: sub-Markov mass", check_graph_mass),
    ("star graph: edge symmetry", check_graph_symmetry),
    ("star graph: contraction", check_graph_contraction),
    ("star graph: reflected kernel", check_reflected),
    ("circle: contraction and constants", check_circle_contraction),
    ("circle: rotation equivariance", check_circle_rotation),
    ("circle: K1/K3 generator probes", check_circle_probes),
    ("engine: contraction cascade", check_contraction_cascade),
    ("engine: strong continuity", check_strong_continuity),
    ("engine: m schedule", check_schedule),
    ("engine: F vs F_mu equivalence", check_equivalence),
    ("engine: monotone convergence, bounded mu", check_monotone_bounded),
    ("engine: monotone convergence, circle", check_monotone_circle),
]

# known failures tracked by the acceptance suite, listed but not run here
KNOWN_RED = [
    ("engine: monotone convergence, Cauchy scenario",
     "tracked by acceptance criterion A1 (grid truncation of the heavy tail)"),
]


def verify_suite(seed=0, g_func=None, checks=None):
    """Run the checks; returns (all_ok, report_text, report_hash, timings)."""
    lines, timings, all_ok = [], {}, True
    for name, fn in (checks or CHECKS):
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            try:
                if fn is check_g_monotone:
                    ok, detail = fn(seed, g_func=g_func)
                else:
                    ok, detail = fn(seed)
            except Exception as exc:  # a crashing check is a failing check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
        timings[name] = time.perf_counter() - t0
        all_ok &= bool(ok)
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    for name, why in KNOWN_RED:
        lines.append(f"KNOWN-RED  {name}: {why}")
    text = "\n".join(lines) + "\n"
    digest = hashlib.sha256(text.encode()).hexdigest()
    return all_ok, text, digest, timings
