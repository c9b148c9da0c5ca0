import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernoff_subord.engine import GaussianBump
from chernoff_subord.errors import DomainError, TruncationWarning
from chernoff_subord.euclidean import (DiffusionCoefficients, DiffusionStep, EuclideanGrid,
                                       stencil_weights)
from chernoff_subord.steps import generator_probe


def line(R=10.0, h=0.05, **coeffs):
    grid = EuclideanGrid.from_spacing(1, R, h)
    return grid, DiffusionStep(grid, DiffusionCoefficients(**coeffs), warn=False)


def test_grid_layout():
    g = EuclideanGrid.from_spacing(1, 2.0, 0.5)
    np.testing.assert_allclose(g.axis, [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2])
    assert g.weights.sum() == pytest.approx(4.0)
    g2 = EuclideanGrid(2, 1.0, 9)
    assert g2.points.shape == (81, 2) and g2.weights.sum() == pytest.approx(4.0)
    with pytest.raises(DomainError):
        EuclideanGrid(1, 1.0, 4)
    with pytest.raises(DomainError):
        EuclideanGrid(3, 1.0, 16)


@pytest.mark.parametrize("t", [1.0, 0.1, 1e-2])
def test_heat_matches_gaussian_closed_form(t):
    grid, step = line()
    x = grid.axis
    bump = GaussianBump()
    np.testing.assert_allclose(step.apply(t, bump(x)), bump.heat(t, x), atol=1e-12)


def test_heat_with_drift_and_killing():
    grid, step = line(A=2.0, B=0.5, C=0.3)
    x = grid.axis
    bump = GaussianBump(center=0.5, var=0.7)
    np.testing.assert_allclose(step.apply(0.4, bump(x)), bump.heat(0.4, x, 2.0, 0.5, 0.3),
                               atol=1e-12)


def test_stencil_regime_close_to_semigroup():
    # t A / h^2 < 0.75: moment-matched three-point rows
    grid, step = line(h=0.05)
    x = grid.axis
    bump = GaussianBump()
    t = 1e-4
    out = step.apply(t, bump(x))
    assert step.n_stencil_rows == grid.size
    assert np.max(np.abs(out - bump.heat(t, x))) < 1e-7


@pytest.mark.parametrize("v", [0.0, 0.1, 0.4, 0.74])
def test_stencil_weights_moments(v):
    for delta in (-0.5, -0.2, 0.0, 0.3, 0.5):
        wm, w0, wp = stencil_weights(np.array([v]), np.array([delta]))
        w = np.array([wm[0], w0[0], wp[0]])
        offs = np.array([-1, 0, 1]) - delta
        assert w.min() >= -1e-15
        assert w.sum() == pytest.approx(1.0)
        assert (w * offs).sum() == pytest.approx(0.0, abs=1e-14)
        # below |delta| - delta^2 the stencil falls back to linear interpolation
        var = max(v, abs(delta) - delta * delta)
        assert (w * offs ** 2).sum() == pytest.approx(var, abs=1e-14)


def test_probe_of_square_is_one():
    grid, step = line()
    x = grid.axis
    inner = np.abs(x) <= 4
    probe = generator_probe(step, x ** 2, 1e-3)
    assert np.max(np.abs(probe[inner] - 1)) < 1e-9


def test_probe_with_constant_drift():
    grid, step = line(B=0.7)
    x = grid.axis
    phi = np.exp(-x * x)
    exact = 0.5 * (4 * x * x - 2) * phi + 0.7 * (-2 * x) * phi
    assert np.max(np.abs(generator_probe(step, phi, 1e-3) - exact)) < 5e-3


def test_killing_factor():
    grid, step = line(C=0.8)
    np.testing.assert_allclose(step.apply(0.5, np.ones(grid.size))[np.abs(grid.axis) < 4],
                               np.exp(-0.4), rtol=1e-12)


def test_identity_at_zero():
    grid, step = line(A=lambda p: 1 + 0.1 * p[:, 0] ** 2, B=0.3)
    phi = np.sin(grid.axis)
    assert np.array_equal(step.apply(0.0, phi), phi)


@given(t=st.floats(1e-5, 0.5), seed=st.integers(0, 2 ** 16))
def test_contraction_and_positivity(t, seed):
    grid = EuclideanGrid.from_spacing(1, 8.0, 0.1)
    step = DiffusionStep(grid, DiffusionCoefficients(A=lambda p: 1 + 0.5 * np.sin(p[:, 0]),
                                                     B=lambda p: 0.3 * np.cos(p[:, 0]),
                                                     C=0.1), warn=False)
    phi = np.random.default_rng(seed).uniform(-1, 1, grid.size)
    out = step.apply(t, phi)
    inner = grid.interior(0.5)
    assert np.max(np.abs(out[inner])) <= np.max(np.abs(phi)) * (1 + 1e-6)
    assert step.apply(t, np.abs(phi)).min() >= -1e-12


def test_exact_for_constant_coefficients():
    grid, step = line(R=8.0, h=0.1)
    phi = np.exp(-grid.axis ** 2 / 2)
    base = step.apply(1.0, phi)
    v = phi
    for _ in range(8):
        v = step.apply(1.0 / 8, v)
    assert np.max(np.abs(v - base)) < 1e-6


def test_two_dimensional_heat():
    grid = EuclideanGrid.from_spacing(2, 6.0, 0.2)
    step = DiffusionStep(grid, DiffusionCoefficients(A=np.array([[1.0, 0.3], [0.3, 0.8]])),
                         warn=False)
    p = grid.points
    phi = np.exp(-(p ** 2).sum(1) / 2)
    t = 0.5
    S = np.eye(2) + t * np.array([[1.0, 0.3], [0.3, 0.8]])
    q = np.einsum("ni,ij,nj->n", p, np.linalg.inv(S), p)
    exact = np.exp(-q / 2) / np.sqrt(np.linalg.det(S))
    inner = grid.interior(0.5)
    assert np.max(np.abs(step.apply(t, phi) - exact)[inner]) < 1e-10


def test_two_dimensional_probe():
    grid = EuclideanGrid.from_spacing(2, 6.0, 0.2)
    step = DiffusionStep(grid, DiffusionCoefficients(B=np.array([0.5, -0.2])), warn=False)
    p = grid.points
    r2 = (p ** 2).sum(1)
    phi = np.exp(-r2 / 2)
    lap = (r2 - 2) * phi
    grad = -p * phi[:, None]
    exact = 0.5 * lap + grad @ np.array([0.5, -0.2])
    # t = 1e-3 with h = 0.2 is in the stencil regime, whose O(h^2) error dominates
    assert np.max(np.abs(generator_probe(step, phi, 1e-3) - exact)) < 2e-2


def test_coefficient_validation():
    grid = EuclideanGrid.from_spacing(1, 2.0, 0.1)
    with pytest.raises(DomainError):
        DiffusionStep(grid, DiffusionCoefficients(A=-1.0))
    with pytest.raises(DomainError):
        DiffusionStep(grid, DiffusionCoefficients(C=-0.5))
    g2 = EuclideanGrid.from_spacing(2, 2.0, 0.25)
    with pytest.raises(DomainError):
        DiffusionStep(g2, DiffusionCoefficients(A=np.array([[1.0, 0.5], [0.0, 1.0]])))


def test_leak_warning():
    grid = EuclideanGrid.from_spacing(1, 2.0, 0.1)
    step = DiffusionStep(grid, DiffusionCoefficients(), warn=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        step.apply(4.0, np.ones(grid.size))
    assert any(issubclass(w.category, TruncationWarning) for w in caught)
    assert step.max_leak > 1e-6


def test_negative_time_rejected():
    grid, step = line()
    with pytest.raises(ValueError):
        step.apply(-1.0, np.ones(grid.size))
