"""Acceptance criteria, one test each.

Every test appends a ``ACCEPTANCE <n> PASS|FAIL`` line to the session log
(echoed in the terminal summary) and then asserts the criterion literally.
The wall-clock budget is part of each criterion.
"""
import time

import numpy as np
import pytest

from vortexburst.burst_solver import GammaConfig, field_sensitivity, solve_burst
from vortexburst.coords import TransformedState, rtx_field
from vortexburst.core import (VortexConfiguration, center_of_vorticity_of, free_velocity,
                              hamiltonian_of, moment_of_inertia_of, pair_product_sum)
from vortexburst.dynamics import (SystemSpec, disk_gamma, disk_hamiltonian_of, integrate,
                                  time_reverse)
from vortexburst.fields import affine_field, constant_field, zero_field
from vortexburst.markov import MarkovScenario, ensemble_stats, sample
from vortexburst.nburst import NBurstProblem, PathBuilder, solve_disk_burst, solve_nburst
from vortexburst.selfsimilar import (L_eigenvalues, asrelation_residual, eigen_discriminants,
                                     params_for, self_similar_positions)
from vortexburst.weakform import TestFunction, diamond_pairing_of, energy_ledger, \
    standard_battery, weak_residual

from conftest import random_configuration
from oracles import loop_diamond_pairing, pushforward_rtx

BACKGROUND = VortexConfiguration(np.array([1.0, -0.5, 0.8]),
                                 5 * np.exp(2j * np.pi * np.arange(3) / 3))
PAIR = VortexConfiguration(np.array([1.0, 1.0]), np.array([-1.0, 1.0], dtype=complex))
SEED = 20261018


class Criterion:
    """Times a criterion, collects named checks and logs one verdict line."""

    def __init__(self, log, number: int, budget: float):
        self.log, self.number, self.budget = log, number, budget
        self.checks: list[tuple[str, bool, str]] = []
        self.start = time.perf_counter()

    def check(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, bool(ok), detail))

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check("runtime", elapsed < self.budget, f"{elapsed:.1f}s < {self.budget:g}s")
        passed = all(ok for _, ok, _ in self.checks)
        failed = [f"{n} ({d})" for n, ok, d in self.checks if not ok]
        detail = "; ".join(f"{n}: {d}" for n, _, d in self.checks if d)
        line = f"ACCEPTANCE {self.number:2d} {'PASS' if passed else 'FAIL'}  {detail}"
        self.log.append(line)
        print(line)
        if not passed:
            pytest.fail("failed checks: " + ", ".join(failed), pytrace=False)


def test_criterion_01_self_similar_exactness(acceptance_log):
    crit = Criterion(acceptance_log, 1, 1.0)
    t = np.logspace(-6, 0, 50)
    worst = 0.0
    for xi in (1.0, -1.0, 84 * np.pi, -84 * np.pi):
        p = params_for(xi)
        z = self_similar_positions(p, t)
        # d/dt [a_j sqrt(2at) exp(i (b/2a) log t)] = a_j Z(t) (1 + i b/a) / (2t)
        dz = z * ((1 + 1j * p.b / p.a) / (2 * t))[:, None]
        model = free_velocity(p.intensities, z)
        worst = max(worst, float(np.max(np.abs(dz - model) / np.abs(model))))
    crit.check("relative ODE residual", worst <= 1e-10, f"{worst:.2e} <= 1e-10")
    crit.finish()


def test_criterion_02_linearization_algebra(acceptance_log):
    crit = Criterion(acceptance_log, 2, 1.0)
    p = params_for(1.0)
    res = max(asrelation_residual(params_for(xi)) / max(1.0, abs(xi))
              for xi in np.concatenate([np.logspace(-3, 3, 25), -np.logspace(-3, 3, 25)]))
    crit.check("asrelation", res <= 1e-12, f"{res:.1e} <= 1e-12")
    lam = L_eigenvalues(p)
    off = float(np.max(np.abs(lam.real + p.a))) / p.a
    crit.check("Re(lambda) = -a", off <= 1e-9,
               f"max|Re+a|/a = {off:.3f}, real parts/a = {np.round(lam.real / p.a, 6).tolist()}")
    linear, constant = eigen_discriminants(p)
    rel_lin = abs(linear / 3.4463e-4 - 1)
    rel_const = abs(constant / 2.7035e-9 - 1)
    crit.check("linear discriminant", rel_lin <= 1e-3, f"{linear:.5e} vs 3.4463e-4")
    crit.check("constant discriminant", rel_const <= 1e-3, f"{constant:.5e} vs 2.7035e-9")
    crit.finish()


def test_criterion_03_degenerate_invariants(acceptance_log):
    crit = Criterion(acceptance_log, 3, 1.0)
    worst = {"pair sum": 0.0, "I": 0.0, "C": 0.0}
    for xi in (1.0, -1.0, 0.37, -5.0, 84 * np.pi):
        p = params_for(xi)
        scale = xi ** 2
        worst["pair sum"] = max(worst["pair sum"], abs(pair_product_sum(p.intensities)) / scale)
        worst["I"] = max(worst["I"], abs(moment_of_inertia_of(p.intensities, p.shape)) / scale)
        # C is linear in xi; scale it against |xi| times the shape size
        worst["C"] = max(worst["C"],
                         abs(center_of_vorticity_of(p.intensities, p.shape)) / abs(xi))
    for name, value in worst.items():
        crit.check(name, value <= 1e-12, f"{value:.1e}")
    crit.finish()


def test_criterion_04_fixed_point_recovery(acceptance_log):
    crit = Criterion(acceptance_log, 4, 30.0)
    cfg = GammaConfig(T=1e-2)
    sol = solve_burst(zero_field(), 1.0, cfg)
    err0 = float(np.max(np.abs(sol.cartesian - self_similar_positions(sol.params, sol.times))))
    crit.check("f = 0", err0 <= 1e-8, f"{err0:.1e} <= 1e-8")
    c = 0.3 - 0.2j
    sol = solve_burst(constant_field(c), 1.0, cfg)
    exact = self_similar_positions(sol.params, sol.times) + np.conj(c) * sol.times[:, None]
    err1 = float(np.max(np.abs(sol.cartesian - exact)))
    crit.check("f = c", err1 <= 1e-6, f"{err1:.1e} <= 1e-6")
    crit.finish()


def test_criterion_05_field_sensitivity(acceptance_log):
    crit = Criterion(acceptance_log, 5, 120.0)
    f = affine_field(0, 0.2 + 0.1j, 0.05)
    per_eps = []
    for eps in (1e-3, 1e-2, 1e-1):
        rep = field_sensitivity(f, affine_field(eps, 0.2 + 0.1j, 0.05), 1.0, GammaConfig(T=1e-2))
        per_eps.append(rep.sup_dist / rep.field_distance)
    spread = max(per_eps) / min(per_eps) - 1
    crit.check("linear in eps", spread <= 0.1, f"spread {spread:.3f} <= 0.1")
    g = affine_field(1e-3, 0.2 + 0.1j, 0.05)
    reps = [field_sensitivity(f, g, 1.0, GammaConfig(T=T)) for T in (1e-2, 5e-3, 2.5e-3)]
    bound_ok = all(r.sup_dist <= r.ratio * np.sqrt(r.T) * r.field_distance * (1 + 1e-12)
                   for r in reps)
    crit.check("bound form", bound_ok)
    ratios = np.array([r.ratio for r in reps])
    drift = float(np.max(np.abs(ratios / ratios[0] - 1)))
    crit.check("ratio stable under T halving", drift <= 0.2,
               f"ratios {np.round(ratios, 4).tolist()}, drift {drift:.2f} <= 0.2; "
               f"T-linear ratios {np.round([r.ratio_linear_in_T for r in reps], 4).tolist()}")
    crit.finish()


def test_criterion_06_conservation(acceptance_log):
    crit = Criterion(acceptance_log, 6, 30.0)
    worst = 0.0
    for seed in range(5):
        xi, z = random_configuration(np.random.default_rng(seed), 4, min_sep=0.3)
        tr = integrate(SystemSpec(VortexConfiguration(xi, z)), (0.0, 1.0), tol=1e-10)
        weights = np.abs(np.outer(xi, xi))
        H = tr.hamiltonian()
        I = moment_of_inertia_of(xi, tr.positions)
        C2 = np.abs(center_of_vorticity_of(xi, tr.positions)) ** 2
        scales = (max(abs(H[0]), weights.sum() / (2 * np.pi)),
                  float(np.sum(weights * np.abs(z[:, None] - z[None, :]) ** 2)),
                  max(C2[0], float(np.abs(z) @ np.abs(xi)) ** 2))
        for values, scale in zip((H, I, C2), scales):
            worst = max(worst, float(np.ptp(values)) / scale)
    crit.check("plane H, I, |C|^2", worst <= 1e-8, f"{worst:.1e} <= 1e-8")
    xi = np.array([1.0, -0.6, 0.8])
    z = np.array([0.3, -0.2 + 0.4j, -0.3 - 0.3j])
    tr = integrate(SystemSpec(VortexConfiguration(xi, z), "disk"), (0.0, 1.0), tol=1e-10)
    H = disk_hamiltonian_of(xi, tr.positions)
    disk = float(np.ptp(H) / abs(H[0]))
    crit.check("disk H", disk <= 1e-7, f"{disk:.1e} <= 1e-7")
    crit.finish()


def test_criterion_07_burst_among_background_vortices(acceptance_log):
    crit = Criterion(acceptance_log, 7, 120.0)
    et = solve_nburst(NBurstProblem(1.0, BACKGROUND), GammaConfig(T=1e-1))
    seg = et.segments[1]
    late = seg.times > seg.t_end / 100
    H = hamiltonian_of(seg.intensities, seg.positions[late])
    I = moment_of_inertia_of(seg.intensities, seg.positions[late])
    h_spread = float(np.ptp(H) / np.max(np.abs(H)))
    i_spread = float(np.ptp(I) / np.max(np.abs(I)))
    crit.check("H constant", h_spread <= 1e-6, f"{h_spread:.1e}")
    crit.check("I constant", i_spread <= 1e-6, f"{i_spread:.1e}")
    p = params_for(1.0)
    t_min = seg.times[0]
    radius = 2 * np.abs(p.shape) * np.sqrt(2 * p.a * t_min)
    inside = bool(np.all(np.abs(seg.positions[0, 3:]) <= radius))
    crit.check("children near origin at t_min", inside, f"t_min={t_min:.1e}")
    crit.finish()


def test_criterion_08_energy_jump(acceptance_log):
    crit = Criterion(acceptance_log, 8, 120.0)
    xi = 1.0
    stated = xi ** 2 / 9 * (np.log(3) + np.log(21) - 2 * np.log(12))
    jumps = {}
    for name, background in (("N=0", None), ("N=3", BACKGROUND)):
        prob = NBurstProblem(xi, background, rho=1.0 if background is None else None)
        et = solve_nburst(prob, GammaConfig(T=1e-2))
        jumps[name] = energy_ledger(et).jumps[0]["jump"]
        crit.check(name, abs(jumps[name] - stated) <= 1e-4 * xi ** 2,
                   f"jump {jumps[name]:.6f} vs {stated:.6f} (times 1/pi: {stated / np.pi:.6f})")
        if background is None:
            back = energy_ledger(time_reverse(et)).jumps[0]["jump"]
            crit.check("time reversed", abs(back + jumps[name]) <= 1e-8,
                       f"{back:.6f}")
    crit.finish()


def _certify(crit, name, traj):
    start = time.perf_counter()
    rep = weak_residual(traj, standard_battery(traj))
    elapsed = time.perf_counter() - start
    crit.check(name, rep.max_residual <= 1e-5 and elapsed < 120,
               f"{rep.max_residual:.1e} in {elapsed:.1f}s")


def test_criterion_09_weak_solution_certification(acceptance_log):
    crit = Criterion(acceptance_log, 9, 360.0)
    config = VortexConfiguration(np.array([1.0, 1.0, -0.5]), np.array([0j, 5 + 0j, -3 + 4j]))
    path = PathBuilder(config)
    path.burst(0, GammaConfig(T=1e-2))
    path.advance(0.1)
    _certify(crit, "burst", path.build())
    collapse = time_reverse(solve_nburst(NBurstProblem(-1.0, rho=1.0), GammaConfig(T=1e-2)))
    _certify(crit, "collapse and merge", collapse)
    rec = sample(MarkovScenario(PAIR, rate=2.0, horizon=1.0, seed=SEED), 0)
    crit.check("markov sample complete", rec.complete, f"{rec.burst_count} bursts")
    _certify(crit, "markov sample", rec.trajectory)
    crit.finish()


def test_criterion_10_disk_burst(acceptance_log):
    crit = Criterion(acceptance_log, 10, 120.0)
    et = solve_disk_burst(0j, 1.0, GammaConfig(T=1e-2))
    seg = et.segments[1]
    c_emp = et.meta["centre_lipschitz"]
    centre = np.abs(seg.positions @ seg.intensities)
    crit.check("|C(t)| <= c t", np.isfinite(c_emp)
               and bool(np.all(centre <= c_emp * seg.times * (1 + 1e-12))), f"c_emp={c_emp:.3e}")
    crit.check("ODE residual", et.meta["ode_residual"] <= 1e-6, f"{et.meta['ode_residual']:.1e}")
    rng = np.random.default_rng(5)
    y = 0.8 * np.sqrt(rng.uniform(size=50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    x = np.exp(2j * np.pi * rng.uniform(size=50))
    boundary = float(np.max(np.abs(-np.log(np.abs(x - y)) / (2 * np.pi) + disk_gamma(x, y))))
    crit.check("gamma boundary", boundary <= 1e-12, f"{boundary:.1e}")
    h = 1e-3
    xin = 0.6 * np.sqrt(rng.uniform(size=50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    lap = (disk_gamma(xin + h, y) + disk_gamma(xin - h, y) + disk_gamma(xin + 1j * h, y)
           + disk_gamma(xin - 1j * h, y) - 4 * disk_gamma(xin, y)) / h ** 2
    harm = float(np.max(np.abs(lap)))
    crit.check("gamma harmonic", harm <= 1e-6, f"{harm:.1e}")
    crit.finish()


@pytest.mark.slow
def test_criterion_11_markov_ensemble(acceptance_log):
    crit = Criterion(acceptance_log, 11, 600.0)
    summary = ensemble_stats(MarkovScenario(PAIR, rate=2.0, horizon=1.0, seed=SEED), 1000)
    d = summary.as_dict()
    crit.check("mean burst count", abs(d["mean_burst_count"] - 2.0) <= 0.134,
               f"{d['mean_burst_count']:.3f}")
    crit.check("KS first gap", d["ks_first_gap"]["pvalue"] > 0.01,
               f"p={d['ks_first_gap']['pvalue']:.3f}")
    crit.check("completed samples certified", d["uncertified"] == 0,
               f"{d['n_samples'] - d['incomplete']} completed, {d['uncertified']} uncertified, "
               f"max residual {d['max_weak_residual']:.1e}")
    crit.finish()


def test_criterion_12_brute_force_oracles(acceptance_log):
    crit = Criterion(acceptance_log, 12, 60.0)
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        xi, z = random_configuration(rng, n, spread=0.6, min_sep=1e-3)
        test_fn = TestFunction(complex(*rng.normal(scale=0.3, size=2)), float(rng.uniform(0.3, 2.0)))
        fast = float(diamond_pairing_of(test_fn, xi, z))
        slow = loop_diamond_pairing(test_fn, xi, z)
        worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
    crit.check("diamond pairing", worst <= 1e-12, f"{worst:.1e} <= 1e-12")
    worst = 0.0
    for field in (None, constant_field(0.3 - 0.2j), affine_field(0.1j, 0.2 + 0.1j, 0.05)):
        for _ in range(50):
            p = params_for(rng.choice([1.0, -1.0, 2.5]))
            t = 10 ** rng.uniform(-4, -1)
            state = TransformedState(2 * p.a * t * rng.uniform(0.5, 1.5), rng.uniform(-1, 1),
                                     complex(*rng.uniform(-0.1, 0.1, 2)),
                                     complex(*rng.uniform(-0.1, 0.1, 2)))
            exact = np.array(rtx_field(t, state, field, p))
            fd = pushforward_rtx(p, t, state, field)
            worst = max(worst, float(np.max(np.abs(exact - fd) / (1 + np.abs(exact)))))
    crit.check("rtx pushforward", worst <= 1e-6, f"{worst:.1e} <= 1e-6")
    crit.finish()
