"""Sampled functions and the minimal state-space protocol shared by the steps."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Node values of a function on a discretized state space."""

    space: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError("sampled function has non-finite values")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def sup(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def values_of(phi):
    return phi.values if isinstance(phi, SampledFunction) else np.asarray(phi, float)
