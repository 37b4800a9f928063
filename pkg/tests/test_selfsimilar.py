import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from vortexburst.core import (center_of_vorticity_of, free_velocity, moment_of_inertia_of,
                              pair_product_sum)
from vortexburst.selfsimilar import (L_eigenvalues, asrelation_residual, build_L,
                                     char_poly_coeffs, eigen_discriminants, holder_bound,
                                     params_for, self_similar_positions, spectrum_report, z_dot,
                                     z_of_t)

XIS = [1.0, -1.0, 84 * np.pi, -84 * np.pi, 0.37, -5.0]
nonzero_xi = st.floats(-500, 500).filter(lambda v: abs(v) > 1e-3)

# Frozen from an independent derivation: the spectrum of the linearization is
# {0, -2a, -a + ib, -a - ib}, so c1 = a^2 + b^2 and c2 = 0 with
# a = sqrt(3)|xi|/(84 pi), b = 5 xi/(84 pi).
LINEAR_DISCRIMINANT_PER_XI2 = 22.0 / (84.0 * np.pi) ** 2      # = b^2 - a^2, 3.1591e-4
CONSTANT_DISCRIMINANT_PER_XI4 = -75.0 / (84.0 * np.pi) ** 4   # = -a^2 b^2, -1.5465e-8


def test_parameters_for_both_signs():
    p = params_for(1.0)
    assert p.a == pytest.approx(np.sqrt(3) / (84 * np.pi))
    assert p.b == pytest.approx(5 / (84 * np.pi))
    assert_allclose(p.shape, [-2 + 2j * np.sqrt(3), -2 + 1j * np.sqrt(3), 1])
    q = params_for(-1.0)
    assert q.a == pytest.approx(p.a)
    assert q.b == pytest.approx(-p.b)
    assert_allclose(q.shape, [2 + 2j * np.sqrt(3), 2 + 1j * np.sqrt(3), -1])
    assert_allclose(p.intensities, [-1 / 3, 2 / 3, 2 / 3])
    with pytest.raises(ValueError):
        params_for(0.0)


@given(nonzero_xi)
def test_asrelation_and_degenerate_invariants(xi):
    p = params_for(xi)
    assert asrelation_residual(p) <= 1e-12 * abs(xi)
    assert abs(pair_product_sum(p.intensities)) <= 1e-12 * xi ** 2
    assert abs(moment_of_inertia_of(p.intensities, p.shape)) <= 1e-12 * xi ** 2
    assert abs(center_of_vorticity_of(p.intensities, p.shape)) <= 1e-12 * abs(xi)


@pytest.mark.parametrize("xi", XIS)
def test_self_similar_solves_free_equation(xi):
    p = params_for(xi)
    t = np.logspace(-6, 0, 50)
    z = self_similar_positions(p, t)
    exact = np.multiply.outer(z_dot(p, t), p.shape)
    rel = np.abs(free_velocity(p.intensities, z) - exact) / np.abs(exact)
    assert rel.max() <= 1e-10


def test_z_dot_matches_finite_difference():
    p = params_for(2.0)
    t = np.array([1e-4, 1e-2, 0.5])
    h = 1e-6 * t
    fd = (z_of_t(p, t + h) - z_of_t(p, t - h)) / (2 * h)
    assert_allclose(z_dot(p, t), fd, rtol=1e-8)
    assert_allclose(np.abs(z_of_t(p, t)) ** 2, 2 * p.a * t, rtol=1e-14)
    with pytest.raises(ValueError):
        z_of_t(p, 0.0)


def test_holder_bound_dominates_sampled_seminorm():
    p = params_for(1.0)
    t = np.logspace(-8, 0, 400)
    z = z_of_t(p, t)
    dz = np.abs(z[:, None] - z[None, :])
    dt = np.abs(t[:, None] - t[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dt > 0, dz / np.sqrt(dt), 0)
    assert q.max() <= holder_bound(p)


def _transformed_x_rates(p, x):
    """dx_j/dt with z1 = a1, straight from the Biot-Savart law."""
    x2, x3 = x
    z = np.array([p.a1, p.a1 * x2 + p.a2, p.a1 * x3 + p.a3])
    v = free_velocity(p.intensities, z)
    return np.array([(v[1] * z[0] - z[1] * v[0]) / z[0] ** 2,
                     (v[2] * z[0] - z[2] * v[0]) / z[0] ** 2])


@pytest.mark.parametrize("xi", [1.0, -1.0, 3.0])
def test_L_is_jacobian_of_transformed_field(xi):
    p = params_for(xi)
    L = build_L(p).entries
    h = 1e-7
    base = _transformed_x_rates(p, (0j, 0j))
    for col, direction in enumerate([(1, 0), (0, 1)]):
        for unit in (1.0, 1j):
            e = np.array(direction, dtype=complex) * unit * h
            fd = (_transformed_x_rates(p, e) - _transformed_x_rates(p, -e)) / (2 * h)
            # L acts on (x, conj x): derivative along unit u is L[:, col] u + L[:, col + 2] conj(u)
            predicted = L[:2, col] * unit + L[:2, col + 2] * np.conj(unit)
            assert_allclose(fd, predicted, rtol=1e-6, atol=1e-9 * abs(p.a))
    assert_allclose(base, 0, atol=1e-12 * abs(xi))


@pytest.mark.parametrize("xi", XIS)
def test_spectrum_is_zero_minus_two_a_and_complex_pair(xi):
    p = params_for(xi)
    dense = np.sort_complex(np.linalg.eigvals(build_L(p).entries))
    expected = np.sort_complex(np.array([0, -2 * p.a, -p.a + 1j * p.b, -p.a - 1j * p.b]))
    for lam in expected:
        assert np.min(np.abs(dense - lam)) <= 1e-9 * abs(p.a)
    for lam in expected:
        assert np.min(np.abs(L_eigenvalues(p) - lam)) <= 1e-7 * abs(p.a)
    assert spectrum_report(p)["charpoly_vs_dense"] <= 1e-7 * abs(p.a)


@pytest.mark.parametrize("xi", XIS)
def test_characteristic_coefficients_and_discriminants(xi):
    p = params_for(xi)
    c1, c2 = char_poly_coeffs(p)
    assert c1 == pytest.approx(p.a ** 2 + p.b ** 2, rel=1e-10)
    assert abs(c2) <= 1e-10 * (p.a ** 2 + p.b ** 2) ** 2
    d1, d2 = eigen_discriminants(p)
    assert d1 == pytest.approx(LINEAR_DISCRIMINANT_PER_XI2 * xi ** 2, rel=1e-9)
    assert d2 == pytest.approx(CONSTANT_DISCRIMINANT_PER_XI4 * xi ** 4, rel=1e-6)
    assert LINEAR_DISCRIMINANT_PER_XI2 == pytest.approx(3.1591e-4, rel=1e-4)
    assert CONSTANT_DISCRIMINANT_PER_XI4 == pytest.approx(-1.5465e-8, rel=1e-4)
