import numpy as np
import pytest
from numpy.testing import assert_allclose

from vortexburst.quadrature import geometric_grid, holder_seminorm, power_grid


def _power_error(power, nodes):
    grid = geometric_grid(1e-2, nodes)
    cum = grid.cumulative(grid.t ** power, tail_power=power)
    return float(np.max(np.abs(cum / (grid.t ** (power + 1) / (power + 1)) - 1)))


@pytest.mark.parametrize("power", [0.0, 0.5, 1.0, 2.0])
def test_cumulative_integral_of_power_on_geometric_grid(power):
    assert _power_error(power, 256) <= 5e-6


@pytest.mark.parametrize("power", [1.0, 2.0])
def test_cumulative_quadrature_is_sixth_order_in_log_time(power):
    coarse, fine = _power_error(power, 128), _power_error(power, 255)
    assert np.log2(coarse / fine) >= 5.5


def test_cumulative_integral_of_log_oscillation():
    grid = geometric_grid(1.0, 512, 1e-12)
    b = 3.0
    values = np.cos(b * np.log(grid.t))
    # antiderivative of cos(b log t) vanishing at 0
    exact = grid.t * (np.cos(b * np.log(grid.t)) + b * np.sin(b * np.log(grid.t))) / (1 + b ** 2)
    cum = grid.cumulative(values, tail_power=0.0)
    assert np.max(np.abs(cum - exact)[grid.t > 1e-8]) <= 1e-7


def test_power_grid_quadrature():
    grid = power_grid(0.5, 400, 2.0)
    cum = grid.cumulative(np.sqrt(grid.t), tail_power=0.5)
    assert_allclose(cum, (2 / 3) * grid.t ** 1.5, rtol=1e-8)


def test_derivative_of_square_root():
    grid = geometric_grid(1e-1, 256)
    d = grid.derivative(np.sqrt(grid.t))
    assert_allclose(d, 0.5 / np.sqrt(grid.t), rtol=1e-7)


def test_vector_valued_integrands():
    grid = geometric_grid(1.0, 128, 1e-6)
    values = np.stack([grid.t, grid.t ** 2], axis=-1)
    cum = grid.cumulative(values, tail_power=np.array([1.0, 2.0]))
    assert_allclose(cum[:, 0], grid.t ** 2 / 2, rtol=1e-6)
    assert_allclose(cum[:, 1], grid.t ** 3 / 3, rtol=1e-5)


def test_holder_seminorm_of_square_root_is_one():
    t = np.linspace(0, 1, 300)
    assert holder_seminorm(t, np.sqrt(t)) == pytest.approx(1.0, rel=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        geometric_grid(-1.0, 100)
    with pytest.raises(ValueError):
        power_grid(1.0, 100, 0.5)
