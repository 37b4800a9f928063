import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vortexburst.burst_solver import GammaConfig
from vortexburst.core import VortexConfiguration
from vortexburst.dynamics import (EventTrajectory, SystemSpec, Trajectory, simulate,
                                  time_reverse)
from vortexburst.nburst import NBurstProblem, PathBuilder, solve_disk_burst, solve_nburst
from vortexburst.weakform import (TestFunction, diamond_pairing_of, energy_ledger, h_phi,
                                  invariant_drift, pairing, standard_battery, weak_residual)

from conftest import random_configuration
from oracles import loop_diamond_pairing


def test_diamond_pairing_matches_double_loop_on_random_configurations():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        xi, z = random_configuration(rng, n, spread=0.6, min_sep=1e-3)
        phi = TestFunction(complex(*rng.normal(scale=0.3, size=2)), float(rng.uniform(0.3, 2.0)))
        fast = float(diamond_pairing_of(phi, xi, z))
        slow = loop_diamond_pairing(phi, xi, z)
        worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
    assert worst <= 1e-12


def test_gradient_matches_finite_difference():
    phi = TestFunction(0.1 - 0.2j, 0.8)
    z = np.array([0.3 + 0.1j, -0.2 - 0.4j, 0.5j])
    h = 1e-6
    fd = ((phi.value(z + h) - phi.value(z - h)) + 1j * (phi.value(z + 1j * h) - phi.value(z - 1j * h))) / (2 * h)
    assert np.max(np.abs(phi.gradient(z) - fd)) <= 1e-8
    assert phi.value(phi.center) == pytest.approx(1.0)
    assert phi.value(phi.center + 0.8) == 0.0


points = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).map(lambda v: complex(*v))


@given(points, points, st.floats(0.2, 3.0))
def test_symmetric_kernel_is_symmetric_and_bounded(x, y, radius):
    if abs(x - y) < 1e-9:
        return
    phi = TestFunction(0.1 + 0.1j, radius)
    value = float(h_phi(phi, x, y))
    assert value == pytest.approx(float(h_phi(phi, y, x)), abs=1e-15)
    assert abs(value) <= phi.gradient_lipschitz / (4 * np.pi) * (1 + 1e-9)


def test_kernel_refuses_the_diagonal():
    phi = TestFunction(0j, 1.0)
    with pytest.raises(ValueError):
        h_phi(phi, 0.1, 0.1)


def test_battery_has_twelve_functions():
    et = solve_nburst(NBurstProblem(1.0, rho=1.0), GammaConfig(T=1e-2, grid_nodes=128))
    battery = standard_battery(et)
    assert len(battery) == 12
    assert battery[0].center == et.events[0].position


def _smooth_run():
    xi, z = random_configuration(np.random.default_rng(21), 4, min_sep=0.4)
    return simulate(SystemSpec(VortexConfiguration(xi, z)), (0.0, 1.0))


def test_smooth_trajectory_satisfies_weak_form():
    et = _smooth_run()
    rep = weak_residual(et, standard_battery(et))
    assert rep.passed and rep.max_residual <= 1e-7


def test_corrupted_trajectory_fails_weak_form():
    et = _smooth_run()
    seg = et.segments[0]
    pos = seg.positions.copy()
    pos[seg.times.size // 2, 0] += 1e-2
    bad = EventTrajectory([Trajectory(seg.times, pos, seg.intensities)], [])
    rep = weak_residual(bad, standard_battery(bad))
    assert not rep.passed


def test_burst_with_background_satisfies_weak_form():
    config = VortexConfiguration(np.array([1.0, 1.0, -0.5]), np.array([0j, 5 + 0j, -3 + 4j]))
    path = PathBuilder(config)
    path.burst(0, GammaConfig(T=1e-2))
    path.advance(0.1)
    et = path.build()
    rep = weak_residual(et, standard_battery(et))
    assert rep.max_residual <= 1e-5


def test_collapse_and_merge_satisfies_weak_form():
    et = solve_nburst(NBurstProblem(-1.0, rho=1.0), GammaConfig(T=1e-2))
    collapse = time_reverse(et)
    rep = weak_residual(collapse, standard_battery(collapse))
    assert rep.max_residual <= 1e-5


def test_disk_burst_satisfies_weak_form_with_image_drift():
    et = solve_disk_burst(0.2 + 0.1j, 1.0, GammaConfig(T=1e-2))
    rep = weak_residual(et, standard_battery(et))
    assert rep.max_residual <= 1e-5


def test_energy_ledger_of_collapse_is_opposite_of_burst():
    et = solve_nburst(NBurstProblem(1.0, rho=1.0), GammaConfig(T=1e-2))
    forward = energy_ledger(et).jumps[0]["jump"]
    # reversing time negates the intensities, which leaves the energy unchanged
    backward = energy_ledger(time_reverse(et)).jumps[0]["jump"]
    assert backward == pytest.approx(-forward, rel=1e-8)


def test_invariant_drift_reports_per_segment():
    et = _smooth_run()
    rows = invariant_drift(et)
    assert len(rows) == len(et.segments)
    assert rows[0]["energy"] <= 1e-8
    assert rows[0]["moment_of_inertia"] <= 1e-8
    assert rows[0]["centre"] <= 1e-8


def test_pairing_is_linear_in_intensities():
    phi = TestFunction(0j, 1.0)
    z = np.array([0.1, 0.2j, -0.3])
    xi = np.array([1.0, -2.0, 0.5])
    assert pairing(phi, 2 * xi, z) == pytest.approx(2 * pairing(phi, xi, z))
