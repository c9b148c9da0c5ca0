"""Brownian motion on a star graph with general vertex conditions, and the step

    F(t)phi(xi) = e^{-tC(xi)} int phi(zeta) P(A(xi') t, xi', dzeta),  xi' = xi + tB(xi)

where P is the transition kernel of the Walsh process with killing rate beta
and stickiness gamma at the vertex. The vertex condition
a phi(v) + (c/2) phi''(v) = sum_k b_k phi_k'(v) fixes the regime.

Node layout of a sampled function: index 0 is the vertex, edge k (0-based)
node i (i = 1..Ne, at x = i h) sits at 1 + k Ne + (i - 1).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erfc, ndtr

from .errors import DomainError, NumericError
from .euclidean import SMALL_T_RATIO, stencil_weights
from .quadrature import adaptive_gl
from .steps import (ChernoffStep, MatrixCache, check_kernel, time_key,
                    warn_leak)

LEAK_BOUND = 1e-6
# u-integrals below are cut at u = w + U_SPAN, where e^{-u^2/2} has dropped
# by at least e^{-U_SPAN^2/2} relative to its value at w
U_SPAN = 10.0
W_MAX = 37.0
REGIMES = ("ac_in_01", "ac_zero", "ac_one")


@dataclass(frozen=True)
class StarGraphSpace:
    d: int
    R: float
    Ne: int

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("a star graph needs at least one edge")
        if self.Ne < 8:
            raise DomainError("need at least 8 nodes per edge")
        if not self.R > 0:
            raise DomainError("R must be positive")

    @property
    def h(self):
        return self.R / self.Ne

    @property
    def size(self):
        return 1 + self.d * self.Ne

    @property
    def x_edge(self):
        return self.h * np.arange(1, self.Ne + 1)

    @property
    def edge_of(self):
        """Edge index per node, -1 for the vertex."""
        return np.concatenate([[-1], np.repeat(np.arange(self.d), self.Ne)])

    @property
    def x_of(self):
        return np.concatenate([[0.0], np.tile(self.x_edge, self.d)])

    def index(self, k, i):
        return 0 if i == 0 else 1 + k * self.Ne + (i - 1)

    @property
    def edge_weights(self):
        """Trapezoid weights on nodes 0..Ne of one edge (node 0 is the vertex)."""
        w = np.full(self.Ne + 1, self.h)
        w[[0, -1]] *= 0.5
        return w

    @property
    def weights(self):
        w = self.edge_weights
        return np.concatenate([[self.d * w[0]], np.tile(w[1:], self.d)])

    def evaluate(self, fn):
        """Values of ``fn(edge, x)`` at the nodes; the vertex is edge -1, x = 0."""
        out = np.asarray(fn(self.edge_of, self.x_of), dtype=float)
        return np.broadcast_to(out, (self.size,)).copy()

    def interior(self, frac=0.5):
        return self.x_of <= frac * self.R


@dataclass(frozen=True)
class BoundaryWeights:
    a: float
    c: float
    b: tuple
    regime: str = field(init=False)
    beta: float = field(init=False)
    gamma: float = field(init=False)
    w: tuple = field(init=False)

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "b", b)
        vals = (self.a, self.c) + b
        if any(not 0 <= x <= 1 for x in vals):
            raise DomainError("a, c and b_k must lie in [0, 1]")
        if self.a == 1:
            raise DomainError("a = 1 is excluded")
        total = self.a + self.c + sum(b)
        if abs(total - 1) > 1e-12:
            raise DomainError(f"vertex weights violate a + c + sum(b) = 1 "
                              f"(sum is {total:.12g})")
        s = self.a + self.c
        if s == 0:
            regime, beta, gamma, w = "ac_zero", 0.0, 0.0, b
        elif abs(s - 1) <= 1e-12:
            regime, gamma = "ac_one", 1.0
            beta = self.a / self.c
            w = tuple(0.0 for _ in b)
        else:
            q = 1 - s
            regime, beta, gamma = "ac_in_01", self.a / q, self.c / q
            w = tuple(x / q for x in b)
            if gamma == 0:
                raise DomainError(
                    "a + c in (0, 1) with c = 0 (gamma = 0) is not supported: the "
                    "kernel is only given for gamma > 0")
        object.__setattr__(self, "regime", regime)
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "w", tuple(w))

    @property
    def d(self):
        return len(self.b)


def g_kernel(t, z):
    """(2 pi t)^{-1/2} exp(-z^2 / 2t)."""
    z = np.asarray(z, dtype=float)
    return np.exp(-z * z / (2 * t)) / np.sqrt(2 * np.pi * t)


def _u_integral(w, integrand, tol):
    """int_w^{w+U_SPAN} e^{-(u^2 - w^2)/2} integrand(u, k) du for each w_k."""
    w = np.atleast_1d(np.asarray(w, dtype=float))

    def f(v):
        u = w[None, :] + v[:, None]
        return np.exp(-v[:, None] * (w[None, :] + 0.5 * v[:, None])) * integrand(u)

    val, _ = adaptive_gl(f, 0.0, U_SPAN, tol=0.0, rtol=tol, order=16, start_panels=2)
    return val


def _log_g_beta_gamma(beta, gamma, t, z, tol=1e-12):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    w = z / np.sqrt(t)
    c = t + gamma * z

    def integrand(u):
        D = np.sqrt(gamma * gamma * u * u + 4 * c[None, :])
        r = 0.5 * (D - gamma * u)
        s = np.maximum(t - r * r, 0.0)
        return u * np.exp(-beta * s / gamma) / D

    val = np.sqrt(2 / np.pi) * _u_integral(w, integrand, tol)
    return np.log(val) - 0.5 * w * w


def g_beta_gamma(beta, gamma, t, z, tol=1e-12):
    """The vertex kernel g_{beta,gamma}(t, z) of the sticky, killed Walsh process.

    Evaluated after the substitution u = (s + gamma z) / (gamma sqrt(t - s)),
    which removes the (t - s)^{-3/2} endpoint factor:

        g = sqrt(2/pi) int_{z/sqrt t}^inf u e^{-u^2/2} e^{-beta s(u)/gamma} / D(u) du,
        D = sqrt(gamma^2 u^2 + 4(t + gamma z)),  s(u) = t - ((D - gamma u)/2)^2.

    The overall constant is (2 pi)^{-1/2}, which makes the kernel reduce to
    g(t, z) as gamma -> 0 and conserve mass when beta = 0.
    """
    if not gamma > 0:
        raise DomainError("g_beta_gamma needs gamma > 0")
    if not t > 0:
        raise DomainError("g_beta_gamma needs t > 0")
    if beta < 0:
        raise DomainError("beta must be >= 0")
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise DomainError("z must be >= 0")
    try:
        out = np.exp(_log_g_beta_gamma(beta, gamma, t, z_arr.ravel(), tol))
    except NumericError as exc:
        raise NumericError(f"g_beta_gamma quadrature failed: {exc}",
                           residual=exc.residual) from exc
    return out.reshape(z_arr.shape) if z_arr.ndim else float(out[0])


def sticky_atom_one(beta, t, x, tol=1e-12):
    """int_0^t e^{-beta(t-s)} x / sqrt(2 pi s^3) e^{-x^2/2s} ds (mass reaching v).

    With s = x^2/u^2 this is sqrt(2/pi) int_{x/sqrt t}^inf e^{-u^2/2}
    e^{-beta(t - x^2/u^2)} du; it equals e^{-beta t} at x = 0.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = x / np.sqrt(t)

    def integrand(u):
        return np.exp(-beta * (t - (x[None, :] / u) ** 2)) if beta else np.ones_like(u)

    with np.errstate(divide="ignore"):
        val = np.sqrt(2 / np.pi) * np.exp(-0.5 * w * w) * _u_integral(w, integrand, tol)
    return val


class GBetaGammaTable:
    """g_{beta,gamma}(t, .) tabulated per time on z = 0, h_z, 2 h_z, ...

    log g + w^2/2 (w = z / sqrt t) is smooth in z and is interpolated by a
    cubic spline; a second spline of g itself gives z-integrals. Tables are
    built on first use of a time and kept.
    """

    def __init__(self, beta, gamma, z_max, h_z, maxsize=4096):
        self.beta, self.gamma = beta, gamma
        self.z_max, self.h_z = z_max, h_z
        self._get = lru_cache(maxsize=maxsize)(self._build)

    def _build(self, t):
        zmax = min(self.z_max, W_MAX * np.sqrt(t))
        n = max(int(np.ceil(zmax / min(self.h_z, np.sqrt(t) / 16))), 8)
        z = np.linspace(0.0, zmax, n + 1)
        L = _log_g_beta_gamma(self.beta, self.gamma, t, z)
        spl = CubicSpline(z, L + 0.5 * z * z / t)
        cum = CubicSpline(z, np.exp(L)).antiderivative()
        return zmax, spl, cum

    def __call__(self, t, z):
        zmax, spl, _ = self._get(float(t))
        z = np.asarray(z, dtype=float)
        out = np.exp(spl(np.minimum(z, zmax)) - 0.5 * z * z / t)
        return np.where(z <= zmax, out, 0.0)

    def integral(self, t, a, b):
        """int_a^b g_{beta,gamma}(t, z) dz for 0 <= a <= b."""
        zmax, _, cum = self._get(float(t))
        if a >= zmax:
            return 0.0
        return float(cum(min(b, zmax)) - cum(a))


class GaussVertexKernel:
    """g(t, z) in the role of the cross-edge kernel (regime a + c = 0)."""

    def __call__(self, t, z):
        return g_kernel(t, z)

    @staticmethod
    def integral(t, a, b):
        st = np.sqrt(t)
        return float(ndtr(b / st) - ndtr(a / st))


class ZeroVertexKernel:
    """No cross-edge transport (regime a + c = 1)."""

    def __call__(self, t, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    @staticmethod
    def integral(t, a, b):
        return 0.0


def make_vertex_kernel(weights, z_max, h_z):
    """The cross-edge kernel G(t, z) of the regime, with its z-integral."""
    if weights.regime == "ac_in_01":
        return GBetaGammaTable(weights.beta, weights.gamma, z_max, h_z)
    if weights.regime == "ac_zero":
        return GaussVertexKernel()
    return ZeroVertexKernel()


def _row_density(weights, G, t, k, x, y):
    """Density of P(t, xi, .) at edge coordinates y on every edge, and the atom.

    xi = (k, x); k < 0 or x <= 0 is the vertex, where the density and atom are
    the x -> 0+ limits. Row j of the density is edge j; y[0] = 0 is v.
    """
    at_v = k < 0 or x <= 0
    x = 0.0 if at_v else x
    dens = 2 * np.asarray(weights.w)[:, None] * G(t, x + y)[None, :]
    if not at_v:
        dens[k] += g_kernel(t, x - y) - g_kernel(t, x + y)
    if weights.regime == "ac_in_01":
        atom = weights.gamma * G(t, np.array([x]))[0]
    elif weights.regime == "ac_one":
        atom = np.exp(-weights.beta * t) if at_v else \
            sticky_atom_one(weights.beta, t, x)[0]
    else:
        atom = 0.0
    return dens, float(atom)


def row_mass(weights, G, t, k, x):
    """Total mass of P(t, xi, .) on the untruncated graph (atom included)."""
    at_v = k < 0 or x <= 0
    x = 0.0 if at_v else x
    mass = 2 * ndtr(x / np.sqrt(t)) - 1.0
    mass += 2 * sum(weights.w) * G.integral(t, x, np.inf)
    if weights.regime == "ac_in_01":
        mass += weights.gamma * G(t, np.array([x]))[0]
    elif weights.regime == "ac_one":
        mass += np.exp(-weights.beta * t) if at_v else sticky_atom_one(weights.beta, t, x)[0]
    return float(mass)


def _kernel_rows(space, weights, G, tau, edge, x):
    """Quadrature-weighted kernel rows; column 0 (the vertex) includes the atom.

    Edge integrals use the trapezoid rule (near-spectral for the Gaussian
    parts). Its endpoint error at the vertex is O(h^2) whenever the edge
    densities have a net slope there. For kernels that fit well inside the
    edges, that error is measured against the exact mass (the rule being
    continued past R so that the cut at R does not enter) and put on the
    vertex column, the node it comes from; if that weight would turn
    negative the row is rescaled instead.
    """
    h, R = space.h, space.R
    y = np.concatenate([[0.0], space.x_edge])
    ew = space.edge_weights
    out = np.zeros((len(tau), space.size))
    for r in range(len(tau)):
        dens, atom = _row_density(weights, G, tau[r], edge[r], x[r], y)
        end = dens[:, -1].sum()
        dens = dens * ew[None, :]
        out[r, 0] = dens[:, 0].sum() + atom
        out[r, 1:] = dens[:, 1:].ravel()
        width = 10 * np.sqrt(tau[r])
        if width > R:
            continue
        y_ext = R + h * np.arange(1, int(np.ceil(width / h)) + 1)
        ext = h * (0.5 * end + _row_density(weights, G, tau[r], edge[r], x[r],
                                            y_ext)[0].sum())
        defect = row_mass(weights, G, tau[r], edge[r], x[r]) - out[r].sum() - ext
        if out[r, 0] + defect >= 0:
            out[r, 0] += defect
        else:
            out[r] *= 1 + defect / out[r].sum()
    return out


def transition_kernel(weights, t, xi, space):
    """P(t, xi, .) sampled on ``space``: (density (d, Ne+1), vertex atom mass).

    ``xi`` is "v" or (edge, x). Density column 0 holds the y -> 0+ limits.
    """
    if weights.d != space.d:
        raise DomainError("boundary weights and space disagree on edge count")
    if not t > 0:
        raise DomainError("transition_kernel needs t > 0")
    k, x = (-1, 0.0) if xi == "v" else (int(xi[0]), float(xi[1]))
    G = make_vertex_kernel(weights, 3 * space.R + 1, space.h / 4)
    y = np.concatenate([[0.0], space.x_edge])
    return _row_density(weights, G, t, k, x, y)


def kernel_mass(space, density, atom):
    return float(np.sum(density * space.edge_weights[None, :]) + atom)


def _as_graph_field(spec):
    if callable(spec):
        return spec
    val = float(spec)
    return lambda edge, x: np.full(np.shape(x), val)


@dataclass(frozen=True, eq=False)
class GraphCoefficients:
    """A (bounded between positive constants), B (B(v) = 0), C >= 0.

    Constants or callables ``f(edge, x)``; B is the velocity along the edge
    coordinate (positive = away from the vertex).
    """

    A: Any = 1.0
    B: Any = 0.0
    C: Any = 0.0


class StarGraphStep(ChernoffStep):
    def __init__(self, space, weights, coeffs=None, leak_bound=LEAK_BOUND,
                 warn=True, cache=None):
        if weights.d != space.d:
            raise DomainError("boundary weights and space disagree on edge count")
        self.space = space
        self.weights = weights
        self.coeffs = coeffs or GraphCoefficients()
        self.A_fn = _as_graph_field(self.coeffs.A)
        B_fn = _as_graph_field(self.coeffs.B)
        self.B = space.evaluate(B_fn)
        self.C = space.evaluate(_as_graph_field(self.coeffs.C))
        A_nodes = space.evaluate(self.A_fn)
        if np.any(A_nodes <= 0):
            raise DomainError("A must be strictly positive")
        if abs(self.B[0]) > 0:
            raise DomainError("B must vanish at the vertex")
        if np.any(self.C < 0):
            raise DomainError("C must be nonnegative")
        self.A_v = float(A_nodes[0])
        self.G = make_vertex_kernel(weights, 3 * space.R + 1, space.h / 4)
        self.leak_bound = leak_bound
        self.warn = warn
        self.cache = cache if cache is not None else MatrixCache()
        self.max_leak = 0.0

    def matrix(self, t):
        return self.cache.get(time_key(t), lambda: self._build(t))

    def _apply(self, t, vals):
        return self.matrix(t) @ vals

    def _shifted(self, t):
        sp = self.space
        edge, x = sp.edge_of.copy(), sp.x_of + t * self.B
        clamp = (edge < 0) | (x <= 0)
        edge[clamp], x[clamp] = -1, 0.0
        A = np.where(clamp, self.A_v, self.A_fn(edge, x))
        return edge, x, A

    def _build(self, t):
        sp, N, h = self.space, self.space.size, self.space.h
        t_rows = np.broadcast_to(np.asarray(t, dtype=float), (N,))
        edge, x, A = self._shifted(t_rows)
        tau = A * t_rows
        v = tau / (h * h)
        small = v < SMALL_T_RATIO
        mat = np.zeros((N, N))
        exact = ~small
        for r in np.nonzero(small)[0]:
            row = self._small_row(tau[r], v[r], edge[r], x[r])
            if row is None:
                exact[r] = True
            else:
                mat[r] = row
        idx = np.nonzero(exact)[0]
        if idx.size:
            mat[idx] = _kernel_rows(sp, self.weights, self.G, tau[idx], edge[idx], x[idx])
            inner = sp.interior()[idx] & (self.weights.regime == "ac_zero")
            if inner.any():
                leak = float(np.max(1.0 - mat[idx][inner].sum(axis=1)))
                self.max_leak = max(self.max_leak, leak)
                if self.warn:
                    warn_leak(leak, self.leak_bound, "star-graph step")
        mat *= np.exp(-t_rows * self.C)[:, None]
        check_kernel(mat, "star-graph step")
        return mat

    def _vertex_small_row(self, tau, v):
        sp, wts = self.space, self.weights
        row = np.zeros(sp.size)
        ones = [sp.index(k, 1) for k in range(sp.d)]
        if wts.regime == "ac_zero":
            row[0] = 1 - v
            row[ones] = np.asarray(wts.b) * v
        elif wts.regime == "ac_one":
            row[0] = np.exp(-wts.beta * tau)
        else:
            # generator at v: (sum_k b_k phi_k'(v) - a phi(v)) / c, one-sided
            # differences for phi_k'(v)
            out = tau * np.asarray(wts.b) / (wts.c * sp.h)
            row[ones] = out
            row[0] = 1 - out.sum() - tau * wts.a / wts.c
            if row[0] < 0:
                return None
        return row

    def _small_row(self, tau, v, edge, x):
        """Stencil row for an under-resolved kernel; None asks for the exact row."""
        sp = self.space
        if edge < 0:
            return self._vertex_small_row(tau, v)
        pos = x / sp.h
        j0 = int(np.rint(pos))
        if j0 == 0:
            vrow = self._vertex_small_row(tau, v)
            if vrow is None:
                return None
            return (1 - pos) * vrow + pos * self._edge_stencil(edge, 1, 0.0, v)
        return self._edge_stencil(edge, j0, pos - j0, v)

    def _edge_stencil(self, edge, j0, delta, v):
        sp = self.space
        row = np.zeros(sp.size)
        wm, w0, wp = stencil_weights(np.array(v), np.array(delta))
        for j, w in ((j0 - 1, wm), (j0, w0), (j0 + 1, wp)):
            if j <= sp.Ne:
                row[sp.index(edge, j)] += float(w)
        return row


def reflected_kernel(t, x, y):
    """Half-line reflected Brownian kernel g(t, x - y) + g(t, x + y)."""
    return g_kernel(t, x - y) + g_kernel(t, x + y)


def half_line_mass(t, x):
    """Mass of the Dirichlet kernel p^D(t, x, .) on (0, inf): 1 - erfc(x / sqrt(2t))."""
    return 1.0 - erfc(np.asarray(x) / np.sqrt(2 * t))
