"""Bernstein functions, Levy measures and (sigma, lambda, mu) triplets."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NumericError
from .quadrature import integrate_log

# Integration window in u = log s for Levy densities.
U_WINDOW = (-80.0, 80.0)
QUAD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LevyMeasure:
    """A Radon measure on (0, inf): finitely many atoms plus a density.

    ``bounded`` is declared, never inferred; for a bounded measure the total
    mass is computed at construction and must be finite.
    """

    atoms: tuple = ()
    density: Optional[Callable] = None
    bounded: bool = False
    name: str = "custom"
    integrability_bound: float = np.inf
    total_mass: float = field(init=False)

    def __post_init__(self):
        atoms = tuple((float(s), float(m)) for s, m in self.atoms)
        for s, m in atoms:
            if not s > 0:
                raise DomainError(f"atom location must be > 0, got {s}")
            if not m > 0:
                raise DomainError(f"atom mass must be > 0, got {m}")
        object.__setattr__(self, "atoms", atoms)
        if self.density is not None:
            ibar = self.density_integral(lambda s: s / (1.0 + s))
            if not np.isfinite(ibar) or ibar > self.integrability_bound:
                raise DomainError(
                    f"int s/(1+s) mu(ds) = {ibar} violates the declared bound "
                    f"{self.integrability_bound}")
        if self.bounded:
            mass = sum(m for _, m in atoms)
            if self.density is not None:
                try:
                    dmass = self.density_integral(lambda s: np.ones_like(s))
                    # mass in the outer strips of the window must be negligible
                    lo, hi = U_WINDOW
                    edge = sum(integrate_log(lambda s: self.density(s), a, b,
                                             tol=QUAD_TOL)[0]
                               for a, b in ((lo, lo / 2), (hi / 2, hi)))
                except NumericError as exc:
                    raise DomainError(
                        "measure flagged bounded but its density mass does not "
                        "converge") from exc
                if not np.isfinite(dmass) or edge > 1e-8 * max(1.0, dmass):
                    raise DomainError("measure flagged bounded but its density mass "
                                      "does not converge")
                mass += dmass
            object.__setattr__(self, "total_mass", float(mass))
        else:
            object.__setattr__(self, "total_mass", np.inf)

    @property
    def is_zero(self):
        return not self.atoms and self.density is None

    def density_integral(self, g, tol=QUAD_TOL):
        """Integral of ``g(s) * density(s)`` over the shipped window."""
        if self.density is None:
            return 0.0
        val, _ = integrate_log(lambda s: g(s) * self.density(s), *U_WINDOW,
                               tol=tol)
        return float(val)

    def integrate(self, g, tol=QUAD_TOL):
        """Integral of ``g`` against the whole measure (atoms + density)."""
        total = sum(m * g(np.array([s]))[0] for s, m in self.atoms)
        return total + self.density_integral(g, tol)


@dataclass(frozen=True, eq=False)
class BernsteinTriplet:
    sigma: float = 0.0
    lam: float = 0.0
    mu: LevyMeasure = field(default_factory=LevyMeasure)

    def __post_init__(self):
        if self.sigma < 0 or self.lam < 0:
            raise DomainError(
                f"sigma and lambda must be >= 0, got {self.sigma}, {self.lam}")

    def without_drift_and_killing(self):
        """The triplet (0, 0, mu) of the jump part."""
        return BernsteinTriplet(0.0, 0.0, self.mu)


def eval_bernstein(triplet, z, tol=QUAD_TOL):
    """Evaluate f(z) = sigma + lambda z + int (1 - e^{-sz}) mu(ds) for z >= 0."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr < 0):
        raise DomainError("Bernstein functions are evaluated on z >= 0 only")
    out = triplet.sigma + triplet.lam * z_arr
    for s, m in triplet.mu.atoms:
        out = out - m * np.expm1(-s * z_arr)
    if triplet.mu.density is not None:
        dens = triplet.mu.density

        def g(s):
            return -np.expm1(-s[:, None] * z_arr[None, :]) * dens(s)[:, None]

        val, err = integrate_log(g, *U_WINDOW, tol=tol)
        out = out + val
    return out if np.ndim(z) else float(out[0])


def laplace_residual(law, triplet, t, x, tol=1e-13):
    """|int e^{-xs} eta_t(ds) - e^{-t f(x)}| with the left side by quadrature."""
    if t <= 0 or x <= 0:
        raise DomainError("laplace_residual needs t > 0 and x > 0")
    lhs = law.laplace_numeric(t, x, tol=tol)
    rhs = np.exp(-t * eval_bernstein(triplet, x))
    return abs(lhs - rhs)


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Variable killing rate sigma(.) and time scale lambda(.) on a state space.

    The callables receive whatever the state space's ``evaluate`` passes.
    """

    sigma_fn: Callable
    lambda_fn: Callable
    lambda_min: float
    lambda_max: float
    sigma_min: float = 0.0

    def __post_init__(self):
        if not (0 < self.lambda_min <= self.lambda_max < np.inf):
            raise DomainError("lambda bounds must satisfy 0 < min <= max < inf")

    def evaluate(self, space):
        lam = np.asarray(space.evaluate(self.lambda_fn), dtype=float)
        sig = np.asarray(space.evaluate(self.sigma_fn), dtype=float)
        lo, hi = self.lambda_min, self.lambda_max
        if np.any(lam < lo * (1 - 1e-12)) or np.any(lam > hi * (1 + 1e-12)):
            raise DomainError(f"lambda field leaves [{lo}, {hi}]")
        if np.any(sig < self.sigma_min - 1e-12):
            raise DomainError(f"sigma field drops below {self.sigma_min}")
        return sig, lam


# Shipped Levy densities, parameterized. Each returns a LevyMeasure.

def stable_half_measure(scale=1.0):
    """Levy measure of f(z) = scale * sqrt(z)."""
    c = scale / (2.0 * np.sqrt(np.pi))
    return LevyMeasure(density=lambda s: c * s ** -1.5, name="stable-1/2")


def gamma_measure(rate=1.0):
    """Levy measure of f(z) = log(1 + z / rate)."""
    return LevyMeasure(density=lambda s: np.exp(-rate * s) / s, name="gamma")


def inverse_gaussian_measure(delta=1.0, gamma=1.0):
    """Levy measure of f(z) = delta (sqrt(2z + gamma^2) - gamma)."""
    c = delta / np.sqrt(2.0 * np.pi)
    return LevyMeasure(density=lambda s: c * s ** -1.5 * np.exp(-0.5 * gamma ** 2 * s),
                       name="inverse-gaussian")


def exponential_jump_measure(mass=1.0, rate=1.0):
    """Bounded measure mass * rate * e^{-rate s} ds (exponential jumps)."""
    return LevyMeasure(density=lambda s: mass * rate * np.exp(-rate * s),
                       bounded=True, name="exponential-jumps")


def atomic_measure(atoms):
    return LevyMeasure(atoms=tuple(atoms), bounded=True, name="atoms")


DENSITY_PRESETS = {
    "stable-1/2": stable_half_measure,
    "gamma": gamma_measure,
    "inverse-gaussian": inverse_gaussian_measure,
    "exponential-jumps": exponential_jump_measure,
}


def closed_form_bernstein(name, **params):
    """Closed forms of the shipped Bernstein functions, used by tests."""
    if name == "stable-1/2":
        scale = params.get("scale", 1.0)
        return lambda z: scale * np.sqrt(z)
    if name == "gamma":
        rate = params.get("rate", 1.0)
        return lambda z: np.log1p(z / rate)
    if name == "inverse-gaussian":
        d, g = params.get("delta", 1.0), params.get("gamma", 1.0)
        return lambda z: d * (np.sqrt(2 * z + g * g) - g)
    if name == "exponential-jumps":
        k, r = params.get("mass", 1.0), params.get("rate", 1.0)
        return lambda z: k * z / (r + z)
    raise KeyError(name)

