"""The ChernoffStep protocol, trivial steps, and a bounded kernel-matrix cache."""

import threading
import warnings
from collections import OrderedDict

import numpy as np
from scipy import sparse

from .errors import NumericGuardError, TruncationWarning
from .spaces import values_of

NEG_GUARD = -1e-12
CACHE_BYTES = 512 * 2 ** 20


class ChernoffStep:
    """A family F(t) acting on node-value vectors of ``space``.

    Subclasses implement ``_apply(t, values)``; ``t`` is a scalar or, for the
    pointwise-rescaled families, an array with one time per node (row). The
    vectors may carry a trailing batch axis.
    """

    space = None
    contraction = True

    def apply(self, t, phi):
        vals = values_of(phi)
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("step time must be >= 0")
        if not np.any(t_arr):
            return vals.copy()
        return self._apply(t if t_arr.ndim else float(t_arr), vals)

    def _apply(self, t, vals):
        raise NotImplementedError

    __call__ = apply


class IdentityStep(ChernoffStep):
    def __init__(self, space=None):
        self.space = space

    def _apply(self, t, vals):
        return vals.copy()


class KillingStep(ChernoffStep):
    """phi -> e^{-t C} phi for a nonnegative node field C."""

    def __init__(self, space, c_values):
        self.space = space
        self.c = np.asarray(c_values, dtype=float)

    def _apply(self, t, vals):
        fac = np.exp(-np.asarray(t) * self.c)
        return fac[:, None] * vals if vals.ndim == 2 else fac * vals


def generator_probe(step, phi, t):
    """(F(t) phi - phi) / t."""
    if not t > 0:
        raise ValueError("probe time must be positive")
    vals = values_of(phi)
    return (step.apply(t, vals) - vals) / t


def time_key(t):
    t = np.asarray(t, dtype=float)
    return float(t) if t.ndim == 0 else t.tobytes()


class MatrixCache:
    """Thread-safe LRU of kernel matrices bounded by total bytes."""

    def __init__(self, budget=CACHE_BYTES):
        self.budget = budget
        self._store = OrderedDict()
        self._bytes = 0
        self._lock = threading.Lock()

    @staticmethod
    def _size(mat):
        if sparse.issparse(mat):
            return mat.data.nbytes + mat.indices.nbytes + mat.indptr.nbytes
        return mat.nbytes

    def get(self, key, build):
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                return self._store[key]
        mat = build()
        size = self._size(mat)
        with self._lock:
            if key not in self._store and size <= self.budget:
                self._store[key] = mat
                self._bytes += size
                while self._bytes > self.budget:
                    _, old = self._store.popitem(last=False)
                    self._bytes -= self._size(old)
        return mat

    def clear(self):
        with self._lock:
            self._store.clear()
            self._bytes = 0


def check_kernel(mat, where):
    vals = mat.data if sparse.issparse(mat) else mat
    if vals.size and vals.min() < NEG_GUARD:
        raise NumericGuardError(f"negative kernel value in {where}",
                                residual=float(vals.min()))


def warn_leak(leak, bound, where):
    if leak > bound:
        warnings.warn(f"{where}: kernel mass {leak:.2e} leaked past the grid "
                      f"boundary on interior rows (bound {bound:.0e})",
                      TruncationWarning, stacklevel=3)


def matvec(mat, vals):
    out = mat @ vals
    return np.asarray(out)
