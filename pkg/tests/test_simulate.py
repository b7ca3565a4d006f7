import math

import numpy as np
import pytest

from zrlab import core
from zrlab import simulate as sim
from zrlab.errors import DomainError


def test_conservation_over_many_events():
    box = core.Box.segment(20)
    init = np.zeros(20, dtype=np.int64)
    init[0] = 50
    st = sim.SimState(box, core.staircase(), init, seed=11)
    st.advance(12000.0)
    assert st.events >= 1_000_000
    assert st.occupancy.sum() == 50 and st.occupancy.min() >= 0
    assert st.max_drift <= 1e-9
    assert st.total_rate == pytest.approx(float(st.deg @ core.staircase().values[st.occupancy]))


def test_same_seed_same_trajectory():
    init = [3, 0, 1, 2]
    a = sim.kmc_run(4, core.staircase(), init, 50.0, seed=5, cadence=0.25)
    b = sim.kmc_run(4, core.staircase(), init, 50.0, seed=5, cadence=0.25)
    c = sim.kmc_run(4, core.staircase(), init, 50.0, seed=6, cadence=0.25)
    assert a.events == b.events
    np.testing.assert_array_equal(a.mode_value, b.mode_value)
    np.testing.assert_array_equal(a.final, b.final)
    assert not np.array_equal(a.mode_value, c.mode_value)


def test_empty_system_returns_immediately():
    tr = sim.kmc_run(3, core.linear(), [0, 0, 0], 10.0, cadence=1.0)
    assert tr.events == 0 and tr.N == 0
    assert np.all(tr.mode_value == 0)


def test_bad_arguments():
    with pytest.raises(DomainError):
        sim.kmc_run(3, core.linear(), [1, 0, 0], 0.0)
    with pytest.raises(DomainError):
        sim.kmc_run(3, core.linear(), [1, -1, 0], 1.0)


def test_two_site_occupation_clt():
    # two-state chain, rate 1 each way: asymptotic variance of the time fraction is 1 / (4 T)
    T = 1e4
    out = sim.empirical_law_check(2, core.linear(), 1, T, seed=3)
    sigma = 1 / (2 * math.sqrt(T))
    assert abs(out["empirical"][0] - 0.5) <= 3 * sigma


@pytest.mark.parametrize("family,L,N", [(core.linear, 3, 3), (core.staircase, 3, 2)])
def test_empirical_law(family, L, N):
    out = sim.empirical_law_check(L, family(), N, 1e5, seed=1)
    assert out["tv"] <= 0.02
    assert not out["under_sampled"]


def test_under_sampled_flag():
    out = sim.empirical_law_check(3, core.linear(), 3, 0.3, seed=1)
    assert out["under_sampled"]
    assert out["tv"] > 0.2


def test_sample_canonical_law():
    rate = core.staircase()
    s = core.enumerate_sector(3, 3)
    rng = sim.stream(2)
    draws = np.array([sim.sample_canonical(3, rate, 3, rng) for _ in range(20000)])
    freq = np.bincount(s.rank_many(draws), minlength=s.size) / len(draws)
    p = core.canonical_measure(s, rate).probs
    assert 0.5 * np.abs(freq - p).sum() <= 0.02


def test_reversibility_smoke():
    out = sim.reversibility_check(3, core.staircase(), 3, 1e5, seed=2)
    assert abs(out["z_score"]) <= 3
    assert out["balance_ratio"] == pytest.approx(1.0, rel=1e-12)
    for emp, exact, n in ((out["rate_ab"], out["generator_ab"], out["n_ab"]),
                          (out["rate_ba"], out["generator_ba"], out["n_ba"])):
        assert abs(emp / exact - 1) <= 3 / math.sqrt(n) + 0.01


def test_trajectory_rows_and_header():
    tr = sim.kmc_run(5, core.linear(), [1, 1, 1, 1, 1], 2.0, seed=0, cadence=0.5)
    rows = list(tr.rows())
    assert len(rows) == 5 and rows[0][0] == 0.0
    assert all(r[2] == 5 for r in rows)
    assert sim.Trajectory.HEADER[:3] == ("t", "mode_value", "N")


def test_mode_weights_are_walk_eigenvector():
    n = 9
    w = sim.mode_weights(core.Box.segment(n))
    lap = np.zeros((n, n))
    for x in range(n - 1):
        lap[x, x + 1] = lap[x + 1, x] = 1
    lap -= np.diag(lap.sum(axis=1))
    np.testing.assert_allclose(lap @ w, -sim.single_particle_gap(n) * w, atol=1e-13)


def test_relaxation_errors():
    with pytest.raises(DomainError):
        sim.relaxation_estimate(8, core.linear(), 0)
    with pytest.raises(DomainError):
        sim.relaxation_estimate(8, core.linear(), 8, replicas=4)


def test_relaxation_small_lattice():
    res = sim.relaxation_estimate(8, core.linear(), 8, seed=1)
    exact = 1 / sim.single_particle_gap(8)
    assert abs(res.tau / exact - 1) <= 0.25
    assert res.ci_low <= res.tau <= res.ci_high
    assert not res.unconverged


def test_relaxation_thread_independent():
    a = sim.relaxation_estimate(6, core.staircase(), 6, seed=4, horizon=200.0)
    b = sim.relaxation_estimate(6, core.staircase(), 6, seed=4, horizon=200.0, threads=3)
    assert a.tau == b.tau
    np.testing.assert_array_equal(a.replica_taus, b.replica_taus)


def test_streams_differ_by_replica():
    assert sim.stream(1, 0).random() != sim.stream(1, 1).random()
    assert sim.stream(1, 2).random() == sim.stream(1, 2).random()
