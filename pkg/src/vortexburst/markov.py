"""Random weak solutions: bursts at Poisson times, merges on collapse.

Stream layout: sample ``i`` of a scenario with seed ``s`` draws its
inter-arrival times from ``SeedSequence(s, spawn_key=(i, 0))`` and its
vortex choices from ``SeedSequence(s, spawn_key=(i, 1))``, both through
PCG64. Adding samples or changing the number of arrivals never perturbs
another sample or the other stream.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .burst_solver import BurstConvergenceError, GammaConfig, MembershipError
from .core import SingularConfigurationError, VortexConfiguration
from .dynamics import EventTrajectory, IntegrationConfig
from .nburst import OuterIterationError, PathBuilder
from .weakform import energy_ledger, standard_battery, weak_residual

ARRIVAL_STREAM = 0
INDEX_STREAM = 1

_BURST_FAILURES = (MembershipError, OuterIterationError, BurstConvergenceError,
                   SingularConfigurationError, ValueError)


@dataclass(frozen=True, eq=False)
class MarkovScenario:
    """Initial plane configuration, burst rate, horizon and per-burst window.

    ``isolated_rho`` is the ball radius used when the bursting vortex is
    alone. ``gamma`` and ``integration`` configure the burst solver and the
    regular integrator; their defaults are coarser than the library
    defaults so that ensembles of a thousand samples stay cheap, and still
    certify the weak formulation far below 1e-5.
    """

    initial: VortexConfiguration
    rate: float
    horizon: float
    seed: int = 0
    burst_T: float = 1e-2
    isolated_rho: float = 1.0
    gamma: GammaConfig = field(default_factory=lambda: GammaConfig(grid_nodes=128))
    integration: IntegrationConfig = field(
        default_factory=lambda: IntegrationConfig(step_factor=1.0))

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.burst_T > 0:
            raise ValueError("burst_T must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def stream(seed: int, sample_index: int, which: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(seed), spawn_key=(int(sample_index), int(which)))))


def draw_arrivals(rng: np.random.Generator, rate: float, horizon: float):
    """Poisson arrival times in ``[0, horizon]``, drawn one gap at a time.

    Also returns the first gap, which may overshoot the horizon; it is an
    exact Exponential(rate) draw.
    """
    out = []
    first = t = rng.exponential(1.0 / rate)
    while t <= horizon:
        out.append(t)
        t += rng.exponential(1.0 / rate)
    return np.array(out), float(first)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One sample path with its random draws and per-burst certificates."""

    trajectory: EventTrajectory
    arrival_times: np.ndarray
    jump_times: np.ndarray
    chosen: list
    certificates: list
    deferrals: list
    complete: bool = True
    failure: str | None = None
    sample_index: int = 0
    first_gap: float = float("nan")

    @property
    def burst_count(self) -> int:
        return len(self.jump_times)

    def event_list(self) -> list:
        return [(type(ev).__name__, float(ev.t), complex(ev.position)) for ev in self.trajectory.events]


def sample(sc: MarkovScenario, sample_index: int = 0) -> SampleRecord:
    """One sample path on ``[0, max(horizon, end of the last burst window)]``.

    An arrival inside the window of the previous burst is deferred to the
    window end. A failed burst construction truncates the sample there and
    marks it incomplete.
    """
    arrivals, first_gap = draw_arrivals(stream(sc.seed, sample_index, ARRIVAL_STREAM), sc.rate, sc.horizon)
    pick = stream(sc.seed, sample_index, INDEX_STREAM)
    path = PathBuilder(sc.initial, 0.0, integration=sc.integration)
    jump_times, chosen, deferrals = [], [], []
    failure = None
    for a in arrivals:
        t_jump = max(float(a), path.t)
        if t_jump > a:
            deferrals.append({"arrival": float(a), "deferred_to": t_jump})
        path.advance(t_jump)
        index = int(pick.integers(path.config.n))
        try:
            path.burst(index, sc.gamma, rho=sc.isolated_rho if path.config.n == 1 else None,
                       T_cap=sc.burst_T, normalize=True)
        except _BURST_FAILURES as exc:
            failure = f"burst at t={t_jump:.6g} of vortex {index} failed: {exc}"
            break
        jump_times.append(t_jump)
        chosen.append(index)
    if failure is None:
        path.advance(max(sc.horizon, path.t))
    traj = path.build({"kind": "markov", "seed": int(sc.seed), "sample_index": int(sample_index)})
    return SampleRecord(traj, arrivals, np.array(jump_times), chosen, path.bursts, deferrals,
                        failure is None, failure, sample_index, first_gap)


@dataclass(frozen=True)
class SampleSummary:
    sample_index: int
    complete: bool
    burst_count: int
    arrival_times: tuple
    first_gap: float
    vortex_counts: tuple
    energy_jumps: tuple
    energy_change: float
    weak_residual: float | None
    certified: bool | None
    deferrals: int
    failure: str | None


def summarize(rec: SampleRecord, certify: bool = True, tolerance: float = 1e-5) -> SampleSummary:
    traj = rec.trajectory
    ledger = energy_ledger(traj)
    jumps = tuple(float(j["jump"]) for j in ledger.jumps)
    h_first = float(np.atleast_1d(traj.segments[0].hamiltonian())[0])
    h_last = float(np.atleast_1d(traj.segments[-1].hamiltonian())[-1])
    residual = certified = None
    if certify and rec.complete:
        rep = weak_residual(traj, standard_battery(traj), tolerance=tolerance)
        residual, certified = rep.max_residual, rep.passed
    return SampleSummary(rec.sample_index, rec.complete, rec.burst_count,
                         tuple(float(a) for a in rec.arrival_times), rec.first_gap,
                         tuple(traj.vortex_counts()), jumps, h_last - h_first,
                         residual, certified, len(rec.deferrals), rec.failure)


def ks_first_gaps(gaps, rate: float):
    """Gaps pooled across a sample are biased by the stop at the horizon; first gaps are not."""
    return stats.kstest(np.asarray(gaps, dtype=float), stats.expon(scale=1.0 / rate).cdf)


def first_gaps(sc: MarkovScenario, n_samples: int) -> np.ndarray:
    """First inter-arrival gap of samples ``0 .. n_samples - 1`` without running them."""
    return np.array([draw_arrivals(stream(sc.seed, i, ARRIVAL_STREAM), sc.rate, sc.horizon)[1]
                     for i in range(n_samples)])


def _run_one(args):
    sc, i, certify = args
    return summarize(sample(sc, i), certify)


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    """Burst-count statistics, vortex-count traces and energy bookkeeping."""

    samples: list
    rate: float
    horizon: float

    @property
    def burst_counts(self) -> np.ndarray:
        return np.array([s.burst_count for s in self.samples])

    @property
    def mean_burst_count(self) -> float:
        return float(np.mean(self.burst_counts))

    def ks_interarrival(self):
        """KS test of the first inter-arrival gaps against Exponential(rate)."""
        return ks_first_gaps(np.array([s.first_gap for s in self.samples]), self.rate)

    @property
    def energy_additivity_error(self) -> float:
        """max over samples of |total energy change - sum of ledger jumps|."""
        errs = [abs(s.energy_change - sum(s.energy_jumps)) for s in self.samples]
        return float(max(errs)) if errs else 0.0

    @property
    def incomplete(self) -> int:
        return sum(not s.complete for s in self.samples)

    @property
    def uncertified(self) -> int:
        return sum(s.certified is False for s in self.samples)

    def as_dict(self) -> dict:
        counts = self.burst_counts
        values, freq = np.unique(counts, return_counts=True)
        ks = self.ks_interarrival()
        residuals = [s.weak_residual for s in self.samples if s.weak_residual is not None]
        return {
            "n_samples": len(self.samples),
            "rate": self.rate,
            "horizon": self.horizon,
            "mean_burst_count": self.mean_burst_count,
            "var_burst_count": float(np.var(counts)),
            "burst_count_histogram": {int(v): int(c) for v, c in zip(values, freq)},
            "ks_first_gap": {"statistic": float(ks.statistic), "pvalue": float(ks.pvalue)},
            "incomplete": self.incomplete,
            "uncertified": self.uncertified,
            "max_weak_residual": max(residuals) if residuals else None,
            "energy_jump_total_mean": float(np.mean([sum(s.energy_jumps) for s in self.samples])),
            "energy_additivity_error": self.energy_additivity_error,
            "deferrals": int(sum(s.deferrals for s in self.samples)),
        }


def ensemble_stats(sc: MarkovScenario, n_samples: int, certify: bool = True,
                   workers: int = 1) -> EnsembleSummary:
    """Run samples ``0 .. n_samples - 1``; ``workers > 1`` fans out over processes."""
    jobs = [(sc, i, certify) for i in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_run_one, jobs, chunksize=max(1, n_samples // (4 * workers))))
    else:
        out = [_run_one(j) for j in jobs]
    return EnsembleSummary(out, sc.rate, sc.horizon)
