import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernoff_subord.errors import DomainError
from chernoff_subord.star_graph import (BoundaryWeights, GBetaGammaTable, GraphCoefficients,
                                        StarGraphSpace, StarGraphStep, g_beta_gamma, g_kernel,
                                        half_line_mass, kernel_mass, make_vertex_kernel,
                                        reflected_kernel, row_mass, sticky_atom_one,
                                        transition_kernel)
from chernoff_subord.steps import generator_probe


def test_weights_validation_names_constraint():
    with pytest.raises(DomainError, match=r"a \+ c \+ sum\(b\) = 1"):
        BoundaryWeights(0.2, 0.3, (0.4, 0.25))
    with pytest.raises(DomainError):
        BoundaryWeights(1.0, 0.0, (0.0,))
    with pytest.raises(DomainError):
        BoundaryWeights(0.5, 0.0, (0.5,))  # gamma = 0 inside (0, 1)


def test_regimes():
    w = BoundaryWeights(0.2, 0.3, (0.25, 0.25))
    assert w.regime == "ac_in_01"
    assert w.beta == pytest.approx(0.4) and w.gamma == pytest.approx(0.6)
    assert w.w == pytest.approx((0.5, 0.5))
    assert BoundaryWeights(0.0, 0.0, (0.5, 0.5)).regime == "ac_zero"
    one = BoundaryWeights(0.3, 0.7, (0.0,))
    assert one.regime == "ac_one" and one.beta == pytest.approx(3 / 7)


def test_space_layout():
    sp = StarGraphSpace(3, 2.0, 10)
    assert sp.size == 31 and sp.index(0, 0) == 0 and sp.index(2, 10) == 30
    assert sp.edge_of[0] == -1 and sp.x_of[sp.index(1, 4)] == pytest.approx(0.8)
    assert sp.weights.sum() == pytest.approx(3 * 2.0)


def test_g_beta_gamma_far_field_and_limit():
    assert g_beta_gamma(0.0, 1.0, 1.0, 50.0) == 0.0
    # as gamma -> 0 the vertex kernel tends to g(t, z)
    z = np.array([0.3, 1.0, 2.0])
    np.testing.assert_allclose(g_beta_gamma(0.0, 1e-4, 1.0, z), g_kernel(1.0, z), rtol=1e-3)


@given(gamma=st.floats(0.1, 3), t=st.floats(0.05, 3))
def test_g_beta_gamma_positive_nonincreasing_without_killing(gamma, t):
    z = np.linspace(0, 3, 13)
    g = g_beta_gamma(0.0, gamma, t, z)
    assert g.min() >= 0
    assert np.diff(g).max() <= 1e-14


def _g_brute(beta, gamma, t, z, panels=200000):
    s = (np.arange(panels) + 0.5) * (t / panels)
    a = s + gamma * z
    f = a / (t - s) ** 1.5 * np.exp(-a * a / (2 * gamma ** 2 * (t - s))) \
        * np.exp(-beta * s / gamma)
    return f.sum() * (t / panels) / (gamma ** 2 * np.sqrt(2 * np.pi * t))


def test_g_beta_gamma_with_killing_is_not_monotone():
    # beta > 0 damps paths that spend long at the vertex, which favors larger z
    z = np.array([0.0, 0.25, 0.5])
    g = g_beta_gamma(1.0, 0.5, 1.0, z)
    np.testing.assert_allclose(g, [_g_brute(1.0, 0.5, 1.0, zi) for zi in z], rtol=1e-8)
    assert g[1] > g[2] > g[0]


def test_g_table_matches_direct():
    tab = GBetaGammaTable(0.5, 0.8, 20.0, 0.05)
    z = np.array([0.0, 0.123, 0.77, 2.5])
    np.testing.assert_allclose(tab(0.4, z), g_beta_gamma(0.5, 0.8, 0.4, z), rtol=1e-7)


def test_sticky_atom_at_vertex():
    assert sticky_atom_one(0.7, 1.3, 0.0)[0] == pytest.approx(np.exp(-0.7 * 1.3), rel=1e-12)
    assert sticky_atom_one(0.0, 1.0, 1.0)[0] == pytest.approx(1 - half_line_mass(1.0, 1.0))


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_reflected_kernel_d1(t):
    w = BoundaryWeights(0.0, 0.0, (1.0,))
    sp = StarGraphSpace(1, 10.0, 100)
    y = np.concatenate([[0.0], sp.x_edge])
    for x in (0.0, 0.3, 2.0):
        dens, atom = transition_kernel(w, t, (0, x), sp)
        np.testing.assert_allclose(dens[0], reflected_kernel(t, x, y), rtol=1e-12, atol=1e-300)
        assert atom == 0


@pytest.mark.parametrize("w", [BoundaryWeights(0.0, 0.0, (0.5, 0.3, 0.2)),
                               BoundaryWeights(0.0, 0.4, (0.6,)),
                               BoundaryWeights(0.2, 0.3, (0.25, 0.25)),
                               BoundaryWeights(0.3, 0.7, (0.0, 0.0))],
                         ids=["ac_zero", "sticky", "mixed", "ac_one"])
def test_sub_markov_mass(w):
    G = make_vertex_kernel(w, 40.0, 0.025)
    for t in (0.1, 1.0):
        for k, x in ((-1, 0.0), (0, 0.4), (w.d - 1, 3.0)):
            m = row_mass(w, G, t, k, x)
            assert -1e-12 <= m <= 1 + 1e-6
            if w.a == 0:
                assert m == pytest.approx(1.0, abs=1e-5)


def test_dirichlet_part_nonnegative():
    w = BoundaryWeights(0.2, 0.3, (0.25, 0.25))
    sp = StarGraphSpace(2, 8.0, 80)
    for x in (0.1, 1.0, 5.0):
        dens, _ = transition_kernel(w, 0.5, (0, x), sp)
        assert dens.min() >= -1e-12


def test_edge_symmetry():
    w = BoundaryWeights(0.0, 0.0, (1 / 3, 1 / 3, 1 / 3))
    sp = StarGraphSpace(3, 8.0, 40)
    d0, _ = transition_kernel(w, 0.5, (0, 1.0), sp)
    d2, _ = transition_kernel(w, 0.5, (2, 1.0), sp)
    np.testing.assert_allclose(d2[[2, 1, 0]], d0, rtol=1e-14)


def test_kirchhoff_step_is_a_semigroup():
    w = BoundaryWeights(0.0, 0.0, (0.5, 0.3, 0.2))
    sp = StarGraphSpace(3, 12.0, 120)
    step = StarGraphStep(sp, w, warn=False)
    phi = sp.evaluate(lambda e, x: np.exp(-(x - 1) ** 2))
    a = step.apply(0.7, step.apply(0.5, phi))
    b = step.apply(1.2, phi)
    assert np.max(np.abs(a - b)) < 1e-9


def test_step_row_mass_and_contraction(rng):
    w = BoundaryWeights(0.1, 0.2, (0.4, 0.3))
    sp = StarGraphSpace(2, 10.0, 100)
    step = StarGraphStep(sp, w, warn=False)
    inner = sp.interior(0.5)
    for t in (1e-4, 1e-2, 0.5):
        mat = step.matrix(t)
        sums = np.asarray(mat.sum(axis=1)).ravel()
        assert sums[inner].max() <= 1 + 1e-8
        phi = rng.uniform(-1, 1, sp.size)
        assert np.max(np.abs(step.apply(t, phi)[inner])) <= 1 + 1e-6


def test_interior_generator_probe_variable_coefficients():
    w = BoundaryWeights(0.0, 0.4, (0.6,))
    sp = StarGraphSpace(1, 10.0, 200)
    A = lambda e, x: 1 + 0.2 * np.sin(x)
    B = lambda e, x: 0.3 * x / (1 + x)
    C = lambda e, x: 0.1 + 0 * x
    step = StarGraphStep(sp, w, GraphCoefficients(A, B, C), warn=False)
    x = sp.x_of
    phi = np.exp(-2 * (x - 4) ** 2)
    d1 = -4 * (x - 4) * phi
    d2 = (16 * (x - 4) ** 2 - 4) * phi
    exact = 0.5 * A(0, x) * d2 + B(0, x) * d1 - C(0, x) * phi
    probe = generator_probe(step, phi, 1e-3)
    assert np.max(np.abs(probe - exact)) < 1e-2


def test_drift_must_vanish_at_vertex():
    w = BoundaryWeights(0.0, 0.0, (1.0,))
    sp = StarGraphSpace(1, 5.0, 50)
    with pytest.raises(DomainError):
        StarGraphStep(sp, w, GraphCoefficients(B=1.0))


def test_kernel_mass_helper():
    w = BoundaryWeights(0.0, 0.0, (0.5, 0.5))
    sp = StarGraphSpace(2, 12.0, 240)
    assert kernel_mass(sp, *transition_kernel(w, 0.5, "v", sp)) == pytest.approx(1.0, abs=1e-9)
