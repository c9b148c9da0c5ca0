import numpy as np
import pytest
from scipy.special import ive

from chernoff_subord.circle import (CircleCoefficients, CircleGrid, CircleStep, arc,
                                    circle_heat_exact, k1, k3, normalized_step)
from chernoff_subord.errors import DomainError
from chernoff_subord.steps import generator_probe


def test_arc_distance():
    assert arc(0.1, 2 * np.pi - 0.1) == pytest.approx(0.2)
    assert arc(0.0, np.pi) == pytest.approx(np.pi)


def test_kernels_agree_near_diagonal():
    x = np.array([0.01, 0.05])
    np.testing.assert_allclose(k3(0.3, x, 0.0) / k1(0.3, x, 0.0), 1.0, rtol=1e-5)


def test_constants_and_contraction(rng):
    grid = CircleGrid(128)
    for kernel in ("K1", "K3"):
        for t in (1e-5, 0.1, 2.0):
            np.testing.assert_allclose(normalized_step(kernel, t, np.ones(128), grid), 1.0,
                                       atol=1e-14)
            phi = rng.uniform(-1, 1, 128)
            assert np.max(np.abs(normalized_step(kernel, t, phi, grid))) <= np.max(np.abs(phi))


@pytest.mark.parametrize("kernel", ["K1", "K3"])
def test_rotation_equivariance(kernel, rng):
    grid = CircleGrid(128)
    phi = rng.uniform(-1, 1, 128)
    for s in (3, 64):
        a = normalized_step(kernel, 0.2, np.roll(phi, s), grid)
        b = np.roll(normalized_step(kernel, 0.2, phi, grid), s)
        assert np.max(np.abs(a - b)) < 1e-10


def test_k3_eigenvalue_is_von_mises_ratio():
    # on cos, one K3 step multiplies by I_1(1/t) / I_0(1/t) (continuum limit)
    grid = CircleGrid(512)
    phi = np.cos(grid.theta)
    t = 0.1
    ratio = ive(1, 1 / t) / ive(0, 1 / t)
    np.testing.assert_allclose(normalized_step("K3", t, phi, grid), ratio * phi, atol=1e-12)


def test_k1_iterates_are_exact():
    grid = CircleGrid(256)
    phi = np.cos(3 * grid.theta)
    v = phi
    for _ in range(16):
        v = normalized_step("K1", 1 / 16, v, grid)
    np.testing.assert_allclose(v, np.exp(-4.5) * phi, atol=1e-13)


def test_heat_exact_fft():
    grid = CircleGrid(64)
    th = grid.theta
    out = circle_heat_exact(grid, 0.5, np.sin(2 * th), A=2.0, B=0.0, C=0.1)
    np.testing.assert_allclose(out, np.exp(-0.5 * (4 + 0.1)) * np.sin(2 * th), atol=1e-14)


@pytest.mark.parametrize("kernel", ["K1", "K3"])
def test_probes_converge_to_half_laplacian(kernel):
    grid = CircleGrid(256)
    th = grid.theta
    phi = np.exp(np.cos(th))
    lap = 0.5 * (np.sin(th) ** 2 - np.cos(th)) * phi
    errs = [np.max(np.abs(generator_probe(CircleStep(grid, kernel), phi, t) - lap))
            for t in (1e-2, 1e-3)]
    assert errs[1] < errs[0] and errs[1] < 5e-3


def test_variable_coefficient_probe():
    grid = CircleGrid(256)
    th = grid.theta
    A = lambda th: 1 + 0.3 * np.cos(th)
    B = lambda th: 0.5 * np.sin(th)
    C = lambda th: 0.2 + 0 * th
    step = CircleStep(grid, "K1", CircleCoefficients(A, B, C))
    phi = np.exp(np.cos(th))
    d1 = -np.sin(th) * phi
    d2 = (np.sin(th) ** 2 - np.cos(th)) * phi
    exact = 0.5 * A(th) * d2 + B(th) * d1 - C(th) * phi
    assert np.max(np.abs(generator_probe(step, phi, 1e-3) - exact)) < 1e-2


def test_validation():
    with pytest.raises(DomainError):
        CircleGrid(8)
    with pytest.raises(DomainError):
        CircleStep(CircleGrid(32), "K2")
    with pytest.raises(DomainError):
        CircleStep(CircleGrid(32), "K1", CircleCoefficients(A=-1.0))
