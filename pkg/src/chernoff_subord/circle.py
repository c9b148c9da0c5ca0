"""Pseudo-Gaussian Chernoff steps on the unit circle.

K1 uses the geodesic (arc) distance, K3 the chordal distance of the
embedding into the plane; both are normalized to unit mass on the grid.
The composed step applies the pointwise time change A(.)t, the geodesic
shift x -> x + tB(x) and the killing factor e^{-tC}.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError
from .euclidean import SMALL_T_RATIO, stencil_weights
from .steps import ChernoffStep, MatrixCache, check_kernel, time_key

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class CircleGrid:
    M: int

    def __post_init__(self):
        if self.M < 16:
            raise DomainError("need at least 16 nodes on the circle")

    @property
    def h(self):
        return TWO_PI / self.M

    @property
    def size(self):
        return self.M

    @property
    def theta(self):
        return self.h * np.arange(self.M)

    @property
    def weights(self):
        return np.full(self.M, self.h)

    def evaluate(self, fn):
        return np.broadcast_to(np.asarray(fn(self.theta), dtype=float), (self.M,)).copy()


def arc(x, y):
    d = np.mod(np.asarray(x) - np.asarray(y), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def k1(t, x, y):
    """(2 pi t)^{-1/2} exp(-arc(x, y)^2 / 2t)."""
    a = arc(x, y)
    return np.exp(-a * a / (2 * t)) / np.sqrt(2 * np.pi * t)


def k3(t, x, y):
    """(2 pi t)^{-1/2} exp(-(2 - 2 cos(x - y)) / 2t)."""
    chord2 = 2 - 2 * np.cos(np.asarray(x) - np.asarray(y))
    return np.exp(-chord2 / (2 * t)) / np.sqrt(2 * np.pi * t)


KERNELS = {"K1": k1, "K3": k3}


def _as_circle_field(spec):
    if callable(spec):
        return spec
    val = float(spec)
    return lambda th: np.full(np.shape(th), val)


@dataclass(frozen=True, eq=False)
class CircleCoefficients:
    """A > 0, B (tangent speed, positive = increasing angle), C >= 0."""

    A: Any = 1.0
    B: Any = 0.0
    C: Any = 0.0


class CircleStep(ChernoffStep):
    """F_hat(t) = e^{-tC} o S_t o F_tilde(t); with A = 1, B = C = 0 the plain
    normalized step F_i(t).

    Under-resolved rows (A t / h^2 below SMALL_T_RATIO) use the periodic
    moment-matched stencil; the normalized kernel would otherwise collapse to
    the nearest node.
    """

    def __init__(self, grid, kernel="K1", coeffs=None, cache=None):
        if kernel not in KERNELS:
            raise DomainError(f"unknown circle kernel {kernel!r}")
        self.space = grid
        self.grid = grid
        self.kernel_name = kernel
        self.kernel = KERNELS[kernel]
        self.coeffs = coeffs or CircleCoefficients()
        self.A_fn = _as_circle_field(self.coeffs.A)
        self.B = grid.evaluate(_as_circle_field(self.coeffs.B))
        self.C = grid.evaluate(_as_circle_field(self.coeffs.C))
        if np.any(grid.evaluate(self.A_fn) <= 0):
            raise DomainError("A must be strictly positive")
        if np.any(self.C < 0):
            raise DomainError("C must be nonnegative")
        self.cache = cache if cache is not None else MatrixCache()

    def matrix(self, t):
        return self.cache.get(time_key(t), lambda: self._build(t))

    def _apply(self, t, vals):
        return self.matrix(t) @ vals

    def _build(self, t):
        g = self.grid
        M, h, th = g.M, g.h, g.theta
        t_rows = np.broadcast_to(np.asarray(t, dtype=float), (M,))
        y = np.mod(th + t_rows * self.B, TWO_PI)
        tau = self.A_fn(y) * t_rows
        small = tau / (h * h) < SMALL_T_RATIO
        mat = np.zeros((M, M))
        big = np.nonzero(~small)[0]
        if big.size:
            K = self.kernel(tau[big, None], y[big, None], th[None, :])
            mat[big] = K / K.sum(axis=1, keepdims=True)
        sm = np.nonzero(small)[0]
        if sm.size:
            pos = y[sm] / h
            j0 = np.rint(pos).astype(int)
            wm, w0, wp = stencil_weights(tau[sm] / (h * h), pos - j0)
            for off, w in ((-1, wm), (0, w0), (1, wp)):
                np.add.at(mat, (sm, np.mod(j0 + off, M)), w)
        mat *= np.exp(-t_rows * self.C)[:, None]
        check_kernel(mat, "circle step")
        return mat


def normalized_step(kernel, t, phi, grid):
    """F_i(t) phi = sum K_i phi / sum K_i on the grid (t = 0 returns phi)."""
    return CircleStep(grid, kernel).apply(t, phi)


def circle_heat_exact(grid, t, phi, A=1.0, B=0.0, C=0.0):
    """e^{t(A/2 d^2 + B d - C)} phi for constant coefficients, by FFT."""
    k = np.fft.fftfreq(grid.M, d=1.0 / grid.M)
    mult = np.exp(t * (-0.5 * A * k * k + 1j * B * k - C))
    vals = np.asarray(phi, dtype=float)
    if vals.ndim == 2:
        return np.real(np.fft.ifft(mult[:, None] * np.fft.fft(vals, axis=0), axis=0))
    return np.real(np.fft.ifft(mult * np.fft.fft(vals)))
