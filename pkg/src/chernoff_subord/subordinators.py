"""Subordinator laws eta_t, quadrature rules on (0, inf) and samplers.

Every law here describes the convolution semigroup of a triplet (0, 0, mu)
(or, for :class:`Drift`, the pure-drift case). The 1/2-stable law is
normalized to f(z) = scale * sqrt(z); the inverse Gaussian law uses
f(z) = delta (sqrt(2z + gamma^2) - gamma).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.special import erfc

from .bernstein import (BernsteinTriplet, LevyMeasure, atomic_measure,
                        exponential_jump_measure, gamma_measure,
                        inverse_gaussian_measure, stable_half_measure)
from .errors import BudgetExceeded, DomainError, NumericError, NumericGuardError
from .quadrature import gl_panels, integrate_log

TAIL_TOL = 1e-10
SERIES_TOL = 1e-12
# Density mass below the LUMP_QUANTILE quantile (and never below LUMP_FLOOR)
# is lumped into one node.
LUMP_QUANTILE = 1e-4
LUMP_FLOOR = 1e-10
MAX_POISSON_RATE = 1e6


@dataclass(frozen=True)
class PositiveQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    tail_mass_bound: float

    def __post_init__(self):
        if np.any(self.weights < -1e-12):
            raise NumericGuardError("negative quadrature weight",
                                    residual=float(self.weights.min()))
        if np.any(np.diff(self.nodes) <= 0):
            raise NumericError("quadrature nodes not strictly increasing")

    @property
    def mass(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.nodes)

    def integrate(self, g):
        return float(np.dot(self.weights, g(self.nodes)))


class SubordinatorLaw:
    """Common interface; subclasses fill in the distribution-specific parts."""

    name = "law"
    has_density = True

    def triplet(self):
        raise NotImplementedError

    def laplace_exponent(self, z):
        raise NotImplementedError

    # scipy.stats frozen distribution of eta_t, for density laws
    def _dist(self, t):
        raise NotImplementedError

    def density(self, t, s):
        return self._dist(t).pdf(s)

    def cdf(self, t, s):
        return self._dist(t).cdf(s)

    def window(self, t, tol):
        """Locations (s_lo, s_hi) outside of which each tail has mass < tol."""
        d = self._dist(t)
        return float(d.ppf(tol)), float(d.isf(tol))

    def expect(self, t, g, tol=1e-12):
        """Integral of g against eta_t by adaptive quadrature in log s."""
        lo, hi = self.window(t, 1e-16)
        lo = max(lo, 1e-300)
        val, _ = integrate_log(lambda s: g(s) * self.density(t, s),
                               np.log(lo), np.log(hi), tol=tol)
        return float(val)

    def laplace_numeric(self, t, x, tol=1e-13):
        return self.expect(t, lambda s: np.exp(-x * s), tol=tol)

    def sample(self, t, rng, size=None):
        raise NotImplementedError


@dataclass(frozen=True)
class StableHalf(SubordinatorLaw):
    scale: float = 1.0
    name = "stable-1/2"

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError("scale must be positive")

    def triplet(self):
        return BernsteinTriplet(0.0, 0.0, stable_half_measure(self.scale))

    def laplace_exponent(self, z):
        return self.scale * np.sqrt(z)

    def _dist(self, t):
        tau = self.scale * t
        return stats.levy(scale=0.5 * tau * tau)

    def density(self, t, s):
        tau = self.scale * t
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = tau / (2 * np.sqrt(np.pi)) * s ** -1.5 * np.exp(-tau * tau / (4 * s))
        return np.where(s > 0, out, 0.0)

    def cdf(self, t, s):
        tau = self.scale * t
        return erfc(tau / (2 * np.sqrt(s)))

    def sample(self, t, rng, size=None):
        tau = self.scale * t
        z = rng.standard_normal(size)
        return tau * tau / (2 * z * z)


@dataclass(frozen=True)
class InverseGaussian(SubordinatorLaw):
    delta: float = 1.0
    gamma: float = 1.0
    name = "inverse-gaussian"

    def __post_init__(self):
        if self.delta <= 0 or self.gamma <= 0:
            raise DomainError("inverse Gaussian needs delta > 0 and gamma > 0; "
                              "use StableHalf for gamma = 0")

    def triplet(self):
        return BernsteinTriplet(0.0, 0.0,
                                inverse_gaussian_measure(self.delta, self.gamma))

    def laplace_exponent(self, z):
        return self.delta * (np.sqrt(2 * z + self.gamma ** 2) - self.gamma)

    def _dist(self, t):
        mean = self.delta * t / self.gamma
        shape = (self.delta * t) ** 2
        return stats.invgauss(mean / shape, scale=shape)

    def density(self, t, s):
        dt, g = self.delta * t, self.gamma
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log = (np.log(dt) - 0.5 * np.log(2 * np.pi) + dt * g - 1.5 * np.log(s)
                   - 0.5 * (dt * dt / s + g * g * s))
            out = np.exp(log)
        return np.where(s > 0, out, 0.0)

    def sample(self, t, rng, size=None):
        return rng.wald(self.delta * t / self.gamma, (self.delta * t) ** 2, size)


@dataclass(frozen=True)
class GammaLaw(SubordinatorLaw):
    rate: float = 1.0
    name = "gamma"

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError("rate must be positive")

    def triplet(self):
        return BernsteinTriplet(0.0, 0.0, gamma_measure(self.rate))

    def laplace_exponent(self, z):
        return np.log1p(z / self.rate)

    def _dist(self, t):
        return stats.gamma(a=t, scale=1.0 / self.rate)

    def sample(self, t, rng, size=None):
        return rng.gamma(t, 1.0 / self.rate, size)


class AtomicLaw(SubordinatorLaw):
    """Laws given by finitely many atoms for each t."""

    has_density = False

    def atoms(self, t):
        raise NotImplementedError

    def density(self, t, s):
        raise DomainError(f"{self.name} law has no density")

    def expect(self, t, g, tol=None):
        locs, masses, _ = self.atoms(t)
        return float(np.dot(masses, g(locs)))


@dataclass(frozen=True)
class Drift(AtomicLaw):
    """eta_t = delta_{rate * t}: the pure-drift subordinator f(z) = rate * z."""

    rate: float = 1.0
    name = "drift"

    def triplet(self):
        return BernsteinTriplet(0.0, self.rate, LevyMeasure())

    def laplace_exponent(self, z):
        return self.rate * np.asarray(z)

    def atoms(self, t):
        return np.array([self.rate * t]), np.array([1.0]), 0.0

    def sample(self, t, rng, size=None):
        return np.full(size, self.rate * t) if size is not None else self.rate * t


@dataclass(frozen=True, eq=False)
class CompoundPoisson(AtomicLaw):
    """eta_t = e^{-tK} sum_k t^k mu^{*k} / k! for a bounded mu of mass K.

    Pure-atom measures are convolved exactly; a density part is first
    discretized onto a lattice of step ``lattice_step`` (cell masses at cell
    centers; atoms snapped to the nearest lattice point).
    """

    measure: LevyMeasure = None
    lattice_step: float = 1e-2
    name = "compound-poisson"

    def __post_init__(self):
        if self.measure is None or not self.measure.bounded:
            raise DomainError("compound Poisson law needs a bounded Levy measure")

    @property
    def rate(self):
        return self.measure.total_mass

    def triplet(self):
        return BernsteinTriplet(0.0, 0.0, self.measure)

    def laplace_exponent(self, z):
        return self.measure.integrate(lambda s: -np.expm1(-s * z))

    def series_length(self, t):
        lam = t * self.rate
        if lam > MAX_POISSON_RATE:
            raise BudgetExceeded(f"Poisson rate t*K = {lam:.3g} too large",
                                 estimate=lam, budget=MAX_POISSON_RATE)
        k = int(stats.poisson.isf(SERIES_TOL, lam)) if lam > 0 else 0
        while stats.poisson.sf(k, lam) >= SERIES_TOL:
            k += 1
        return k, float(stats.poisson.sf(k, lam))

    def atoms(self, t):
        """Truncated atom list (locations, masses, truncated mass)."""
        return _cp_atoms(self, float(t))

    def _jump_pmf(self):
        """Locations and probabilities of one jump (density part on a lattice)."""
        mu = self.measure
        if mu.density is None:
            locs = np.array([s for s, _ in mu.atoms])
            p = np.array([m for _, m in mu.atoms]) / mu.total_mass
            return locs, p, False
        ds = self.lattice_step
        s_max = _density_support(mu.density, ds)
        k = np.arange(int(np.ceil(s_max / ds)) + 1)
        cells = np.zeros(len(k))
        edges_nodes, edges_w = gl_panels(0.0, ds * len(k), len(k), order=8)
        vals = mu.density(np.maximum(edges_nodes, 1e-300)) * edges_w
        cells += vals.reshape(len(k), -1).sum(axis=1)
        for s, m in mu.atoms:
            j = int(round(s / ds - 0.5))
            cells[min(max(j, 0), len(k) - 1)] += m
        locs = (k + 0.5) * ds
        return locs, cells / cells.sum(), True

    def laplace_numeric(self, t, x, tol=1e-13):
        mu_hat = self.measure.integrate(lambda s: np.exp(-x * s), tol=tol)
        return float(np.exp(-t * (self.rate - mu_hat)))

    def sample(self, t, rng, size=None):
        lam = t * self.rate
        if lam > MAX_POISSON_RATE:
            raise BudgetExceeded(f"Poisson rate t*K = {lam:.3g} too large",
                                 estimate=lam, budget=MAX_POISSON_RATE)
        locs, p, lattice = self._jump_pmf()
        n = np.atleast_1d(rng.poisson(lam, size))
        out = np.empty(n.shape)
        cdf = np.cumsum(p)
        for i, count in enumerate(n):
            if count == 0:
                out[i] = 0.0
                continue
            idx = np.searchsorted(cdf, rng.random(count) * cdf[-1])
            jumps = locs[idx]
            if lattice:
                jumps = jumps + (rng.random(count) - 0.5) * self.lattice_step
            out[i] = jumps.sum()
        return out if size is not None else float(out[0])


def _density_support(density, ds, tol=1e-14):
    s, step = 1.0, 1.0
    while density(np.array([s]))[0] * s > tol and s < 1e6:
        s += step
        step *= 1.5
    return s


@lru_cache(maxsize=256)
def _cp_atoms(law, t):
    K, trunc = law.series_length(t)
    lam = t * law.rate
    coeffs = stats.poisson.pmf(np.arange(K + 1), lam)
    locs, p, lattice = law._jump_pmf()
    if lattice:
        ds = law.lattice_step
        # location index j corresponds to (j + k/2) ds for a k-fold sum; use the
        # lattice of cell sums: k jumps at centers (i+1/2) ds sum to (j + k/2) ds
        acc = {}
        conv = np.array([1.0])
        for k in range(K + 1):
            offs = 0.5 * k * ds
            for j in np.nonzero(conv > 0)[0]:
                key = round(j * ds + offs, 12)
                acc[key] = acc.get(key, 0.0) + coeffs[k] * conv[j]
            conv = np.convolve(conv, p)
    else:
        acc = {0.0: 0.0}
        dist = {0.0: 1.0}
        for k in range(K + 1):
            for loc, m in dist.items():
                acc[loc] = acc.get(loc, 0.0) + coeffs[k] * m
            nxt = {}
            for loc, m in dist.items():
                for s, q in zip(locs, p):
                    key = round(loc + s, 12)
                    nxt[key] = nxt.get(key, 0.0) + m * q
            dist = nxt
    keys = np.array(sorted(acc))
    masses = np.array([acc[k] for k in keys])
    keep = masses > 0
    return keys[keep], masses[keep], trunc


def density_at(law, t, s):
    """Density of eta_t at s > 0."""
    if not law.has_density:
        raise DomainError(f"{law.name} law has no density")
    if np.any(np.asarray(s) <= 0):
        raise DomainError("density_at needs s > 0")
    return law.density(t, s)


@lru_cache(maxsize=1024)
def build_quadrature(law, t, n_nodes, tail_tol=TAIL_TOL):
    """Positive rule for int g d(eta_t) with bounded continuous g.

    Density laws: Gauss-Legendre in u = log s between the tail_tol
    upper quantile and a low quantile; the mass below the latter is a single
    node at its conditional mean. Atomic laws: the exact atom list.
    """
    if t <= 0:
        raise DomainError("build_quadrature needs t > 0")
    if not law.has_density:
        locs, masses, trunc = law.atoms(t)
        return PositiveQuadrature(np.asarray(locs, float), np.asarray(masses, float),
                                  float(trunc))
    if n_nodes < 4:
        raise DomainError("n_nodes must be >= 4")
    s_lo, s_hi = law.window(t, tail_tol)
    if not (np.isfinite(s_hi) and s_hi > 0):
        raise NumericError("upper tail quantile not finite", residual=s_hi)
    tail = float(1.0 - law.cdf(t, s_hi))
    # the lower tail up to the LUMP_QUANTILE quantile is one node at its
    # conditional mean; the rule is then exact for g affine on [0, s_lo]
    s_lo = max(float(law.window(t, LUMP_QUANTILE)[0]), LUMP_FLOOR)
    m_lump = float(law.cdf(t, s_lo))
    lump_nodes, lump_w = [], []
    if m_lump > 0:
        u_a = np.log(s_lo)
        first, _ = integrate_log(lambda s: s * law.density(t, s), u_a - 60, u_a,
                                 tol=1e-14 * s_lo)
        lump_nodes.append(min(max(first / m_lump, 1e-3 * s_lo), 0.999 * s_lo))
        lump_w.append(m_lump)
    # one high-order panel: the log-space integrand is analytic, and a single
    # rule beats composite panels of the same size by orders of magnitude
    u, wu = gl_panels(np.log(s_lo), np.log(s_hi), 1, n_nodes)
    s = np.exp(u)
    w = wu * s * law.density(t, s)
    nodes = np.concatenate([lump_nodes, s])
    weights = np.concatenate([lump_w, w])
    if tail > 10 * tail_tol:
        raise NumericError(f"tail mass {tail:.2e} above tolerance", residual=tail)
    return PositiveQuadrature(nodes, weights, tail)


def sample(law, t, rng_seed, size=None):
    """Draw from eta_t; deterministic for a given integer seed or Generator."""
    if t <= 0:
        raise DomainError("sample needs t > 0")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else \
        np.random.default_rng(rng_seed)
    return law.sample(t, rng, size)


LAW_PRESETS = {
    "inverse-gaussian": lambda delta=1.0, gamma=1.0: InverseGaussian(delta, gamma),
    "stable-1/2": lambda scale=1.0: StableHalf(scale),
    "gamma": lambda rate=1.0: GammaLaw(rate),
    "drift": lambda rate=1.0: Drift(rate),
}


def make_law(name, **params):
    """Build a law from a preset name and parameters.

    ``compound-poisson`` takes ``atoms=[[s, m], ...]`` and/or
    ``jumps={mass, rate}`` (exponential jump density) plus ``lattice_step``.
    """
    if name == "compound-poisson":
        atoms = [tuple(a) for a in params.get("atoms", [])]
        jumps = params.get("jumps")
        if jumps is not None:
            base = exponential_jump_measure(**jumps)
            measure = LevyMeasure(atoms=tuple(atoms), density=base.density,
                                  bounded=True, name="compound")
        else:
            measure = atomic_measure(atoms)
        return CompoundPoisson(measure, params.get("lattice_step", 1e-2))
    try:
        factory = LAW_PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown law preset {name!r}") from None
    return factory(**params)


def shipped_pairs():
    """(label, law, triplet) for every shipped preset, used by consistency checks."""
    laws = [
        ("inverse-gaussian", InverseGaussian(1.0, 1.0)),
        ("stable-1/2", StableHalf(1.0)),
        ("gamma", GammaLaw(1.0)),
        ("compound-poisson(atom)", make_law("compound-poisson", atoms=[[1.0, 1.0]])),
        ("compound-poisson(exp)", make_law("compound-poisson",
                                           jumps={"mass": 1.0, "rate": 1.0})),
    ]
    return [(label, law, law.triplet()) for label, law in laws]
