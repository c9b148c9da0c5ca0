"""Chernoff families of subordinate semigroups built from a base step, plus oracles.

For a triplet (sigma, lambda, mu) and a base step F Chernoff equivalent to
T_t, with eta^0_t the law of the triplet (0, 0, mu):

    F_0(t) phi       = int [F(s/m(t))]^{m(t)} phi  eta^0_t(ds)
    calF(t) phi      = e^{-sigma t} F(lambda t) F_0(t) phi
    calF_mu(t) phi   = e^{-sigma t} F(lambda t) (phi + t int ([F(s/m)]^m phi - phi) mu(ds))
    calF~(t) phi(x)  = e^{-sigma(x) t} (F(lambda(x) t) F_0(t) phi)(x)

and [calF(t/n)]^n phi -> T^f_t phi.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bernstein import BernsteinTriplet, eval_bernstein, laplace_residual
from .errors import BudgetExceeded, DomainError
from .quadrature import adaptive_gl, gl_panels
from .spaces import values_of
from .subordinators import AtomicLaw, build_quadrature, sample

LAW_CHECK_T = (0.1, 1.0, 5.0)
LAW_CHECK_X = (0.1, 1.0, 10.0)
LAW_TOL = 1e-6
DEFAULT_BUDGET = 1e12


def m_default(t, mode="clamp"):
    """floor(1/t), clamped to at least 1 unless ``mode == "unclamped"``.

    In "unclamped" mode m may be 0, and F^0 is the identity.
    """
    if not t > 0:
        raise DomainError("m(t) is defined for t > 0")
    m = int(np.floor(1.0 / t + 1e-12))
    if mode == "unclamped":
        return m
    if mode != "clamp":
        raise DomainError(f"unknown schedule mode {mode!r}")
    return max(1, m)


def m_const(k):
    if k < 1:
        raise DomainError("constant schedule needs k >= 1")
    return lambda t: int(k)


def power_apply(step, s, m, phi):
    """[F(s/m)]^m phi; m = 0 or s = 0 gives phi."""
    v = values_of(phi).copy()
    if m < 0:
        raise DomainError("m must be >= 0")
    if m == 0 or s == 0:
        return v
    tau = s / m
    for _ in range(m):
        v = step.apply(tau, v)
    return v


@dataclass(frozen=True, eq=False)
class SubordinationConfig:
    """Triplet, law of eta^0 (None when mu = 0), schedule and quadrature size.

    ``allow_atomic`` admits atomic eta^0 (compound Poisson) in calF; the
    convergence theory needs densities, so such runs must opt in.
    """

    triplet: BernsteinTriplet
    law: Optional[object] = None
    schedule: Callable = m_default
    eta_nodes: int = 64
    tail_tol: float = 1e-10
    threads: int = 1
    allow_atomic: bool = False
    check_law: bool = True
    law_residual: float = field(init=False, default=0.0)

    def __post_init__(self):
        mu = self.triplet.mu
        if mu.is_zero:
            if self.law is not None:
                raise DomainError("mu = 0 needs no eta^0 law; pass law=None")
        elif self.law is None:
            raise DomainError("a nonzero Levy measure needs an eta^0 law")
        else:
            if isinstance(self.law, AtomicLaw) and not self.allow_atomic:
                raise DomainError("atomic eta^0 laws are only allowed with "
                                  "allow_atomic=True (or use the bounded-mu family)")
            if self.check_law:
                jump = self.triplet.without_drift_and_killing()
                res = max(laplace_residual(self.law, jump, t, x)
                          for t in LAW_CHECK_T for x in LAW_CHECK_X)
                if res > LAW_TOL:
                    raise DomainError(f"law {self.law.name} does not match mu: "
                                      f"Laplace residual {res:.2e}")
                object.__setattr__(self, "law_residual", res)
        ts = np.geomspace(1e-3, 10, 41)
        ms = [self.schedule(t) for t in ts]
        if any(b > a for a, b in zip(ms, ms[1:])):
            raise DomainError("m schedule must be nonincreasing in t")


def _ordered_sum(weights, parts):
    out = np.zeros_like(parts[0])
    for w, p in zip(weights, parts):
        out += w * p
    return out


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def f0_step(config, step, t, phi):
    """int [F(s/m(t))]^{m(t)} phi eta^0_t(ds) by the eta-quadrature."""
    vals = values_of(phi)
    if t == 0 or config.law is None:
        return vals.copy()
    q = build_quadrature(config.law, float(t), config.eta_nodes, config.tail_tol)
    m = config.schedule(t)
    parts = _map(lambda s: power_apply(step, s, m, vals), q.nodes, config.threads)
    return _ordered_sum(q.weights, parts)


def subordinate_step(config, step, t, phi):
    """calF(t) phi = e^{-sigma t} F(lambda t) F_0(t) phi."""
    vals = values_of(phi)
    if t == 0:
        return vals.copy()
    tr = config.triplet
    inner = f0_step(config, step, t, vals)
    return np.exp(-tr.sigma * t) * step.apply(tr.lam * t, inner)


def levy_density_quadrature(mu, n_nodes=64, rel_tol=1e-14):
    """Nodes and weights for int g d(mu density) of a bounded measure."""
    dens = mu.density
    if dens is None:
        return np.empty(0), np.empty(0)
    u_lo, u_hi = -30.0, 0.0
    mass = mu.density_integral(lambda s: np.ones_like(s))
    while dens(np.array([np.exp(u_hi)]))[0] * np.exp(u_hi) > rel_tol * mass:
        u_hi += 1.0
        if u_hi > 80:
            raise DomainError("Levy density tail does not decay")
    u, w = gl_panels(u_lo, u_hi, max(1, n_nodes // 16), 16)
    s = np.exp(u)
    return s, w * s * dens(s)


def bounded_levy_step(config, step, t, phi, density_nodes=64):
    """calF_mu(t) phi for bounded mu (atoms exact, density by quadrature)."""
    vals = values_of(phi)
    if t == 0:
        return vals.copy()
    tr = config.triplet
    mu = tr.mu
    if not mu.bounded and mu.density is not None:
        raise DomainError("the bounded-Levy family needs a bounded measure mu")
    m = config.schedule(t)
    locs = [s for s, _ in mu.atoms]
    wts = [w for _, w in mu.atoms]
    ds, dw = levy_density_quadrature(mu, density_nodes)
    locs = np.concatenate([locs, ds])
    wts = np.concatenate([wts, dw])
    inner = vals.copy()
    if len(locs):
        parts = _map(lambda s: power_apply(step, s, m, vals) - vals, locs, config.threads)
        inner = inner + t * _ordered_sum(wts, parts)
    return np.exp(-tr.sigma * t) * step.apply(tr.lam * t, inner)


def variable_coeff_step(fields, config, step, t, phi):
    """e^{-sigma(x) t} (F(lambda(x) t) F_0(t) phi)(x) with per-row times."""
    vals = values_of(phi)
    if t == 0:
        return vals.copy()
    sig, lam = fields.evaluate(step.space)
    inner = f0_step(config, step, t, vals)
    out = step.apply(lam * t, inner)
    fac = np.exp(-sig * t)
    return fac[:, None] * out if out.ndim == 2 else fac * out


class Family:
    """A one-parameter family with a cost model, iterated by chernoff_iterate."""

    def __init__(self, apply, cost=None, name="family"):
        self._apply = apply
        self._cost = cost
        self.name = name

    def __call__(self, t, phi):
        return self._apply(t, phi)

    def cost(self, t):
        return self._cost(t) if self._cost is not None else 0.0


def _grid_cost(step):
    n = step.space.size
    return float(n) * n


def step_family(step):
    return Family(step.apply, lambda t: _grid_cost(step), "base")


def subordinate_family(config, step):
    def cost(t):
        nodes = 1 if config.law is None else (
            len(build_quadrature(config.law, t, config.eta_nodes, config.tail_tol)))
        return (nodes * config.schedule(t) + 1) * _grid_cost(step)
    return Family(lambda t, phi: subordinate_step(config, step, t, phi), cost,
                  "subordinate")


def bounded_levy_family(config, step, density_nodes=64):
    mu = config.triplet.mu

    def cost(t):
        nodes = len(mu.atoms) + (density_nodes if mu.density is not None else 0)
        return (nodes * config.schedule(t) + 1) * _grid_cost(step)
    return Family(lambda t, phi: bounded_levy_step(config, step, t, phi, density_nodes),
                  cost, "bounded-levy")


def variable_coeff_family(fields, config, step):
    base = subordinate_family(config, step)
    return Family(lambda t, phi: variable_coeff_step(fields, config, step, t, phi),
                  base.cost, "variable-coefficient")


@dataclass
class IterationResult:
    values: np.ndarray
    t: float
    n: int
    sup_norms: list


def chernoff_iterate(family, t, n, phi, budget=None):
    """[family(t/n)]^n phi, recording the sup-norm after each level."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if budget is not None and isinstance(family, Family):
        est = n * family.cost(t / n)
        if est > budget:
            raise BudgetExceeded(f"estimated work {est:.3g} exceeds budget {budget:.3g}",
                                 estimate=est, budget=budget)
    v = values_of(phi).copy()
    sups = [float(np.max(np.abs(v)))]
    for _ in range(n):
        v = family(t / n, v)
        sups.append(float(np.max(np.abs(v))))
    return IterationResult(v, t, n, sups)


# -- oracles -----------------------------------------------------------------

def subordinate_oracle_exact(law, exact_semigroup, t, phi, tol=1e-10, tail=1e-14):
    """int T_s phi eta_t(ds) with T_s given by ``exact_semigroup(s, phi)``.

    Density laws: adaptive Gauss-Legendre in u = log s between the tail
    quantiles. Atomic laws: the atom sum.
    """
    vals = values_of(phi)
    if t == 0:
        return vals.copy()
    if not law.has_density:
        locs, masses, _ = law.atoms(t)
        return _ordered_sum(masses, [exact_semigroup(s, vals) for s in locs])
    lo, hi = law.window(t, tail)
    lo = max(lo, 1e-300)

    def f(u):
        s = np.exp(u)
        w = s * law.density(t, s)
        return np.stack([wi * exact_semigroup(si, vals) for si, wi in zip(s, w)])

    val, _ = adaptive_gl(f, np.log(lo), np.log(hi), tol=tol, start_panels=8,
                         max_panels=4096)
    return val


def subordinate_oracle_mc(law, step, t, phi, n_samples, seed, resolve=0.1,
                          max_m=256):
    """Monte-Carlo average of [F(s_i/m_i)]^{m_i} phi over s_i ~ eta_t.

    m_i = ceil(s_i / resolve), capped at ``max_m``. Returns the mean and the
    pointwise standard error.
    """
    if n_samples < 1000:
        raise DomainError("the Monte-Carlo oracle needs at least 1000 samples")
    vals = values_of(phi)
    s = np.atleast_1d(sample(law, t, seed, size=n_samples))
    total = np.zeros_like(vals)
    total2 = np.zeros_like(vals)
    for si in s:
        m = int(min(max(1, np.ceil(si / resolve)), max_m))
        r = power_apply(step, si, m, vals)
        total += r
        total2 += r * r
    mean = total / n_samples
    var = np.maximum(total2 / n_samples - mean * mean, 0.0)
    return mean, np.sqrt(var / (n_samples - 1))


def lf0_generator_oracle(mu, exact_semigroup, phi, tol=1e-10):
    """int (T_s phi - phi) mu(ds) for bounded mu."""
    if not mu.bounded:
        raise DomainError("the L^{f0} oracle needs a bounded measure")
    vals = values_of(phi)
    out = np.zeros_like(vals)
    for s, m in mu.atoms:
        out += m * (exact_semigroup(s, vals) - vals)
    if mu.density is not None:
        s_nodes, w = levy_density_quadrature(mu, 128)
        for si, wi in zip(s_nodes, w):
            out += wi * (exact_semigroup(si, vals) - vals)
    return out


def subordinated_fourier_oracle(triplet, phi_hat, x, t, A=1.0, C=0.0, k_max=40.0,
                                tol=1e-12):
    """(1/2pi) int phi_hat(k) e^{-t f(A k^2/2 + C)} e^{ikx} dk for even phi_hat.

    The Fourier route to T^f_t phi for the heat semigroup on R; phi_hat must
    be real and even, and negligible beyond k_max.
    """
    x = np.asarray(x, dtype=float)

    def f(k):
        sym = phi_hat(k) * np.exp(-t * eval_bernstein(triplet, A * k * k / 2 + C))
        return sym[:, None] * np.cos(k[:, None] * x[None, :])

    val, _ = adaptive_gl(f, 0.0, k_max, tol=tol, start_panels=16)
    return val / np.pi


# -- closed-form semigroups for oracles ----------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    """phi(x) = amp exp(-(x - center)^2 / (2 var)) on R."""

    amp: float = 1.0
    center: float = 0.0
    var: float = 1.0

    def __call__(self, x):
        return self.amp * np.exp(-(np.asarray(x) - self.center) ** 2 / (2 * self.var))

    def heat(self, s, x, A=1.0, B=0.0, C=0.0):
        """e^{s(A/2 d^2 + B d - C)} phi at x."""
        v = self.var + A * s
        return (self.amp * np.sqrt(self.var / v) * np.exp(-C * s)
                * np.exp(-(np.asarray(x) + B * s - self.center) ** 2 / (2 * v)))

    def fourier(self, k):
        return self.amp * np.sqrt(2 * np.pi * self.var) * np.exp(-0.5 * self.var * k * k)

    def semigroup(self, x, A=1.0, B=0.0, C=0.0):
        """exact_semigroup(s, values) ignoring ``values`` (they must sample self)."""
        return lambda s, _vals: self.heat(s, x, A, B, C)


def poisson_series_oracle(atoms, exact_semigroup, phi, t, tol=1e-12):
    """e^{-tK} sum_k t^k mu^{*k}/k! applied through T: the compound-Poisson
    subordinate for atomic mu, via the law's exact atom list."""
    from .bernstein import atomic_measure
    from .subordinators import CompoundPoisson
    law = CompoundPoisson(atomic_measure(atoms))
    return subordinate_oracle_exact(law, exact_semigroup, t, phi)
