"""Gaussian Chernoff step for variable-coefficient diffusions on R^d, d in {1, 2}.

F(t)phi(x) = e^{-tC(x)} int p_A(t, x + tB(x), y) phi(y) dy, with p_A the
Gaussian of covariance tA(x). The integral is a trapezoid sum on a uniform
grid over [-R, R]^d, and phi is taken as zero outside the grid.

Rows whose kernel is narrower than the grid can resolve (A t / h^2 below
``SMALL_T_RATIO``) use a three-point, moment-matched stencil around the
node nearest to the shifted center instead of the sampled Gaussian.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import sparse

from .errors import DomainError
from .steps import ChernoffStep, MatrixCache, check_kernel, time_key, warn_leak

# Gaussian rows sampled with variance v h^2 lose at most e^{-2 pi^2 v} of
# their mass to aliasing; v = 0.75 keeps that below 4e-7.
SMALL_T_RATIO = 0.75
ALIAS_RATIO = 2.5
LEAK_BOUND = 1e-6


@dataclass(frozen=True)
class EuclideanGrid:
    dim: int
    R: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("only d = 1 or d = 2 grids are supported")
        if self.n < 8:
            raise DomainError("need at least 8 nodes per axis")
        if not self.R > 0:
            raise DomainError("R must be positive")

    @classmethod
    def from_spacing(cls, dim, R, h):
        n = int(round(2 * R / h)) + 1
        return cls(dim, R, n)

    @property
    def h(self):
        return 2 * self.R / (self.n - 1)

    @property
    def axis(self):
        return np.linspace(-self.R, self.R, self.n)

    @property
    def size(self):
        return self.n ** self.dim

    @property
    def points(self):
        ax = self.axis
        if self.dim == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def weights(self):
        w = np.full(self.n, self.h)
        w[[0, -1]] *= 0.5
        if self.dim == 1:
            return w
        return np.outer(w, w).ravel()

    def evaluate(self, fn):
        """Values of ``fn`` at the nodes; ``fn`` receives coordinates x[..., d]."""
        pts = self.points
        out = fn(pts[:, 0]) if self.dim == 1 else fn(pts)
        return np.broadcast_to(np.asarray(out, dtype=float), (self.size,)).copy()

    def interior(self, frac=0.5):
        return np.all(np.abs(self.points) <= frac * self.R, axis=1)


def _field(spec, pts, shape):
    vals = spec(pts) if callable(spec) else spec
    return np.broadcast_to(np.asarray(vals, dtype=float), shape).copy()


@dataclass(frozen=True, eq=False)
class DiffusionCoefficients:
    """A (SPD matrix field), B (vector field), C (nonnegative scalar field).

    Each entry is a constant or a callable of the node coordinates, shape
    (N, d), returning (N, d, d), (N, d) and (N,) arrays respectively (scalars
    broadcast; in d = 1 a callable may return shape (N,)).
    """

    A: Any = 1.0
    B: Any = 0.0
    C: Any = 0.0

    def evaluate(self, grid):
        pts, N, d = grid.points, grid.size, grid.dim
        A = self.A(pts) if callable(self.A) else self.A
        A = np.asarray(A, dtype=float)
        if d == 1:
            A = np.broadcast_to(A.reshape(-1, 1, 1) if A.ndim else A, (N, 1, 1))
        elif A.ndim == 0:
            A = A * np.broadcast_to(np.eye(d), (N, d, d))
        else:
            A = np.broadcast_to(A, (N, d, d))
        A = np.array(A)
        B = _field(self.B, pts, (N, d)) if not (d == 1 and callable(self.B)) else \
            np.asarray(self.B(pts), float).reshape(N, 1)
        C = _field(self.C, pts, (N,)) if not (d == 1 and callable(self.C)) else \
            np.asarray(self.C(pts), float).reshape(N)
        if not np.allclose(A, np.swapaxes(A, 1, 2)):
            raise DomainError("A must be symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise DomainError("A is not positive definite at some node") from None
        if np.any(C < 0):
            raise DomainError("C must be nonnegative")
        if not np.all(np.isfinite(B)):
            raise DomainError("B must be finite")
        return A, B, C


def kernel_pA(A_at_x, t, x, y):
    """(det A (2 pi t)^d)^{-1/2} exp(-A^{-1}(x-y).(x-y) / 2t)."""
    if not t > 0:
        raise DomainError("kernel_pA needs t > 0")
    A = np.atleast_2d(np.asarray(A_at_x, dtype=float))
    d = A.shape[0]
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise DomainError("A is not positive definite") from None
    diff = np.atleast_1d(np.asarray(x, float) - np.asarray(y, float))
    z = np.linalg.solve(L, diff)
    det = np.prod(np.diag(L)) ** 2
    return float(np.exp(-0.5 * z @ z / t) / np.sqrt(det * (2 * np.pi * t) ** d))


def stencil_weights(v, delta):
    """Weights at offsets (-1, 0, +1) with mean delta and variance v (grid units).

    Falls back to linear interpolation (variance |delta| - delta^2) when the
    requested variance is too small to keep the outer weights nonnegative.
    """
    a = np.maximum(v + delta * delta, np.abs(delta))
    return 0.5 * (a - delta), 1.0 - a, 0.5 * (a + delta)


class DiffusionStep(ChernoffStep):
    """The Gaussian step on an :class:`EuclideanGrid`; matrices cached per time."""

    def __init__(self, grid, coeffs, leak_bound=LEAK_BOUND, warn=True, cache=None):
        self.space = grid
        self.grid = grid
        self.coeffs = coeffs
        self.A, self.B, self.C = coeffs.evaluate(grid)
        self.leak_bound = leak_bound
        self.warn = warn
        self.cache = cache if cache is not None else MatrixCache()
        self.max_leak = 0.0
        self.n_stencil_rows = 0

    def matrix(self, t):
        return self.cache.get(time_key(t), lambda: self._build(t))

    def _apply(self, t, vals):
        return np.asarray(self.matrix(t) @ vals)

    def _build(self, t):
        g = self.grid
        N, d, h = g.size, g.dim, g.h
        tau = np.broadcast_to(np.asarray(t, dtype=float), (N,))
        pts = g.points
        centers = pts + tau[:, None] * self.B
        cov = tau[:, None, None] * self.A / (h * h)
        if d == 1:
            small = cov[:, 0, 0] < SMALL_T_RATIO
        else:
            small = np.linalg.eigvalsh(cov)[:, 0] < SMALL_T_RATIO
        kill = np.exp(-tau * self.C)
        rows, cols, data = [], [], []
        fallback = np.zeros(N, dtype=bool)
        idx = np.nonzero(small)[0]
        if idx.size:
            r, c, w, bad = _stencil_rows(g, idx, centers[idx], cov[idx])
            rows.append(r)
            cols.append(c)
            data.append(w * kill[r])
            fallback[idx[bad]] = True
        gauss = np.nonzero(~small | fallback)[0]
        self.n_stencil_rows = int(small.sum() - fallback.sum())
        if gauss.size == 0:
            mat = sparse.csr_matrix((np.concatenate(data),
                                     (np.concatenate(rows), np.concatenate(cols))),
                                    shape=(N, N))
            check_kernel(mat, "diffusion stencil")
            return mat
        mat = np.zeros((N, N))
        if rows:
            r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(data)
            keep = ~fallback[r]
            np.add.at(mat, (r[keep], c[keep]), w[keep])
        dens = _gauss_rows(pts, g.weights, centers[gauss], tau[gauss], self.A[gauss])
        v_min = cov[:, 0, 0] if d == 1 else np.linalg.eigvalsh(cov)[:, 0]
        sel = fallback[gauss] | (v_min[gauss] < ALIAS_RATIO)
        if sel.any():
            # near-resolution rows carry an aliasing mass error up to
            # 2 exp(-2 pi^2 v); normalize them (and fallback rows) to the lattice mass
            lat = _lattice_mass(h, centers[gauss][sel], tau[gauss][sel],
                                self.A[gauss][sel])
            dens[sel] /= lat[:, None]
        inner = g.interior()[gauss]
        if inner.any():
            leak = float(np.max(1.0 - dens[inner].sum(axis=1)))
            self.max_leak = max(self.max_leak, leak)
            if self.warn:
                warn_leak(leak, self.leak_bound, "diffusion step")
        mat[gauss] = dens * kill[gauss, None]
        check_kernel(mat, "diffusion step")
        return mat


def _gauss_rows(pts, w, centers, tau, A, chunk=256):
    out = np.empty((len(centers), len(pts)))
    d = pts.shape[1]
    for lo in range(0, len(centers), chunk):
        sl = slice(lo, lo + chunk)
        S = tau[sl, None, None] * A[sl]
        Sinv = np.linalg.inv(S)
        det = np.linalg.det(S)
        D = pts[None, :, :] - centers[sl, None, :]
        q = np.einsum("rni,rij,rnj->rn", D, Sinv, D)
        out[sl] = np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** d * det)[:, None] * w
    return out


def _lattice_mass(h, centers, tau, A, width=12):
    """Trapezoid mass of each Gaussian row on the unbounded lattice hZ^d."""
    out = np.empty(len(centers))
    for i, (c, s, a) in enumerate(zip(centers, tau, A)):
        S = s * a
        rad = width * np.sqrt(np.max(np.linalg.eigvalsh(S))) + h
        axes = [np.arange(np.floor((ci - rad) / h), np.ceil((ci + rad) / h) + 1) * h
                for ci in c]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(c)) - c
        q = np.einsum("ni,ij,nj->n", P, np.linalg.inv(S), P)
        out[i] = np.sum(np.exp(-0.5 * q)) * h ** len(c) / np.sqrt(
            (2 * np.pi) ** len(c) * np.linalg.det(S))
    return out


def _stencil_rows(grid, idx, centers, cov):
    """Moment-matched stencil triplets (rows, cols, weights, bad-row mask)."""
    n, h, R = grid.n, grid.h, grid.R
    j0 = np.rint((centers + R) / h).astype(int)
    delta = (centers + R) / h - j0
    if grid.dim == 1:
        wm, w0, wp = stencil_weights(cov[:, 0, 0], delta[:, 0])
        offs = [(-1,), (0,), (1,)]
        ws = [wm, w0, wp]
        bad = np.zeros(len(idx), dtype=bool)
    else:
        M = cov + delta[:, :, None] * delta[:, None, :]
        c = M[:, 0, 1]
        a_raw = M[:, 0, 0] - np.abs(c)
        b_raw = M[:, 1, 1] - np.abs(c)
        a = np.maximum(a_raw, np.abs(delta[:, 0]))
        b = np.maximum(b_raw, np.abs(delta[:, 1]))
        centre = 1.0 - a - b - np.abs(c)
        bad = (a_raw < 0) | (b_raw < 0) | (centre < 0)
        sg = np.where(c >= 0, 1, -1)
        ac = 0.5 * np.abs(c)
        offs = [(-1, 0), (1, 0), (0, -1), (0, 1), (0, 0), "d+", "d-"]
        ws = [0.5 * (a - delta[:, 0]), 0.5 * (a + delta[:, 0]),
              0.5 * (b - delta[:, 1]), 0.5 * (b + delta[:, 1]), centre, ac, ac]
    rows, cols, data = [], [], []
    for off, w in zip(offs, ws):
        if off == "d+":
            jj = j0 + np.column_stack([np.ones_like(sg), sg])
        elif off == "d-":
            jj = j0 - np.column_stack([np.ones_like(sg), sg])
        else:
            jj = j0 + np.array(off)
        ok = np.all((jj >= 0) & (jj < n), axis=1)
        flat = jj[:, 0] if grid.dim == 1 else jj[:, 0] * n + jj[:, 1]
        rows.append(idx[ok])
        cols.append(flat[ok])
        data.append(np.broadcast_to(w, (len(idx),))[ok])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data), bad
