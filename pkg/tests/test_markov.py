import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import stats

from vortexburst import markov
from vortexburst.burst_solver import MembershipError
from vortexburst.core import VortexConfiguration
from vortexburst.markov import (MarkovScenario, draw_arrivals, ensemble_stats, first_gaps,
                                ks_first_gaps, sample, stream, summarize)

PAIR = VortexConfiguration(np.array([1.0, 1.0]), np.array([-1.0, 1.0], dtype=complex))


def scenario(**kw):
    return MarkovScenario(PAIR, rate=kw.pop("rate", 2.0), horizon=kw.pop("horizon", 1.0),
                          seed=kw.pop("seed", 20261018), **kw)


def test_streams_are_reproducible_and_distinct():
    a = stream(5, 3, 0).random(4)
    assert_array_equal(a, stream(5, 3, 0).random(4))
    assert not np.array_equal(a, stream(5, 3, 1).random(4))
    assert not np.array_equal(a, stream(5, 4, 0).random(4))
    assert not np.array_equal(a, stream(6, 3, 0).random(4))


def test_first_gaps_are_exponential():
    gaps = first_gaps(scenario(), 10_000)
    assert ks_first_gaps(gaps, 2.0).pvalue > 0.01
    assert gaps.mean() == pytest.approx(0.5, rel=0.05)


def test_arrival_counts_are_poisson():
    rng = np.random.default_rng(0)
    counts = np.array([draw_arrivals(rng, 2.0, 1.0)[0].size for _ in range(20_000)])
    assert counts.mean() == pytest.approx(2.0, abs=0.05)
    assert counts.var() == pytest.approx(2.0, rel=0.05)
    observed = np.bincount(counts, minlength=9)[:9]
    expected = stats.poisson(2.0).pmf(np.arange(9)) * counts.size
    assert stats.chisquare(observed[:7], expected[:7] * observed[:7].sum() / expected[:7].sum()).pvalue > 0.001


def test_sample_is_deterministic():
    sc = scenario()
    a, b = sample(sc, 4), sample(sc, 4)
    assert_array_equal(a.arrival_times, b.arrival_times)
    assert a.chosen == b.chosen
    assert a.event_list() == b.event_list()
    assert_array_equal(a.trajectory.segments[-1].positions, b.trajectory.segments[-1].positions)


def test_sample_path_structure():
    sc = scenario(seed=7)
    for i in range(5):
        rec = sample(sc, i)
        assert rec.complete
        assert rec.burst_count == rec.arrival_times.size
        assert rec.trajectory.t_end >= sc.horizon - 1e-12
        assert np.all(rec.jump_times >= rec.arrival_times)
        # every burst adds two vortices; merges remove two
        counts = rec.trajectory.vortex_counts()
        assert counts[0] == 2 and all(abs(b - a) == 2 for a, b in zip(counts, counts[1:]))


def test_samples_are_weak_solutions():
    sc = scenario(seed=11)
    for i in range(4):
        s = summarize(sample(sc, i))
        assert s.certified, s
        assert abs(s.energy_change - sum(s.energy_jumps)) <= 1e-6


def test_failed_burst_truncates_the_sample(monkeypatch):
    def refuse(self, *args, **kwargs):
        raise MembershipError("refused", 1e-2)

    monkeypatch.setattr(markov.PathBuilder, "burst", refuse)
    sc = scenario(seed=3)
    rec = sample(sc, 0)
    assert rec.arrival_times.size > 0
    assert not rec.complete
    assert "refused" in rec.failure
    assert rec.burst_count == 0
    assert rec.trajectory.t_end == pytest.approx(rec.arrival_times[0])
    assert summarize(rec).certified is None


def test_ensemble_summary():
    summary = ensemble_stats(scenario(seed=1), 6)
    d = summary.as_dict()
    assert d["n_samples"] == 6
    assert d["uncertified"] == 0
    assert summary.energy_additivity_error <= 1e-6
    assert sum(d["burst_count_histogram"].values()) == 6


def test_scenario_validation():
    with pytest.raises(ValueError):
        scenario(rate=0.0)
    with pytest.raises(ValueError):
        scenario(horizon=-1.0)
    with pytest.raises(ValueError):
        scenario(seed=-1)
