import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab.geometry import Circle, Disk, GeometryError, Interval, Rectangle, Sphere2
from heatlab.stochastic import (ALIVE, BLOCK_SIZE, HIT, KILLED, HitEstimate, PathEnsembleConfig, Target, feynman_kac,
                                killed_hit_prob, mc_exit_prob, occupation_time, simulate, sphere_walk)
from heatlab.theta import ThetaQuery, theta_bessel


def cfg(n=20_000, dt=1e-3, **kw):
    return PathEnsembleConfig(n_paths=n, dt=dt, **kw)


def interval_survival(x, t, terms=400):
    k = 2 * np.arange(terms) + 1
    return float(np.sum(4 / (math.pi * k) * np.sin(k * x) * np.exp(-k * k * t)))


@pytest.mark.parametrize("dom,x,n", [(Interval(-1, 1), [0.0], 1), (Disk(1.0), [0.0, 0.0], 2), (Disk(1.0, 3), [0, 0, 0], 3)])
def test_exit_probability_matches_bessel_series(dom, x, n):
    t = 0.25
    ref = theta_bessel(ThetaQuery(n, 1.0, t)).value
    est = mc_exit_prob(dom, x, t, cfg(40_000, 2.5e-3))
    assert abs(est.p_hat - ref) <= 3 * est.null_std_err(ref)


def test_exit_probability_off_centre_interval():
    x, t = 0.7, 0.4
    ref = 1 - interval_survival(x, t)
    est = mc_exit_prob(Interval(), x, t, cfg(40_000, 2e-3))
    assert est.agrees_with(ref)


def test_bridge_correction_removes_step_bias():
    x, t = math.pi / 2, 0.5
    ref = 1 - interval_survival(x, t)
    on = mc_exit_prob(Interval(), x, t, cfg(40_000, 0.05))
    off = mc_exit_prob(Interval(), x, t, cfg(40_000, 0.05, boundary_correction="none"))
    assert abs(on.p_hat - ref) <= 3 * on.null_std_err(ref)
    assert off.p_hat < ref - 3 * off.null_std_err(ref)


@pytest.mark.parametrize("threads", [2, 3])
def test_results_do_not_depend_on_thread_count(threads):
    base = simulate(Rectangle((1.0, 2.0)), [0.3, 0.5], 0.2, cfg(40_000, 5e-3))
    other = simulate(Rectangle((1.0, 2.0)), [0.3, 0.5], 0.2, cfg(40_000, 5e-3, threads=threads))
    assert np.array_equal(base.status, other.status)
    assert np.array_equal(base.position, other.position)


def test_seed_changes_results_and_replay_is_exact():
    a = mc_exit_prob(Disk(), [0.2, 0.0], 0.1, cfg(5000, seed=1))
    b = mc_exit_prob(Disk(), [0.2, 0.0], 0.1, cfg(5000, seed=1))
    c = mc_exit_prob(Disk(), [0.2, 0.0], 0.1, cfg(5000, seed=2))
    assert a == b
    assert a.hits != c.hits


def test_leading_block_does_not_depend_on_total_count():
    # streams are keyed per block of paths
    small = simulate(Disk(), [0.0, 0.0], 0.01, cfg(BLOCK_SIZE))
    large = simulate(Disk(), [0.0, 0.0], 0.01, cfg(2 * BLOCK_SIZE + 17))
    assert np.array_equal(small.position, large.position[:BLOCK_SIZE])


def test_feynman_kac_circle_cosine():
    t = 0.5
    est = feynman_kac(Circle(), lambda y: np.cos(y[:, 0]), [0.0], t, cfg(20_000, 1e-2))
    assert abs(est.mean - math.exp(-t)) <= 3 * est.std_err


def test_feynman_kac_dirichlet_eigenfunction():
    x, t = 1.0, 0.3
    est = feynman_kac(Interval(), lambda y: np.sin(y[:, 0]), [x], t, cfg(40_000, 2e-3))
    assert abs(est.mean - math.exp(-t) * math.sin(x)) <= 3 * est.std_err


def test_killed_hitting_gamblers_ruin():
    # from 1, reach [2, 3] before 0 on (0, pi): probability 1/2 once time is no constraint
    est = killed_hit_prob(Interval(), Target.ball([2.5], 0.5), [1.0], 30.0, cfg(20_000, 2e-3))
    assert abs(est.p_hat - 0.5) <= 3 * est.null_std_err(0.5) + 2e-3


def test_killed_hitting_harmonic_measure_annulus():
    # hit the disk of radius a before the unit circle from radius r: log(1/r) / log(1/a)
    a, r = 0.25, 0.5
    est = killed_hit_prob(Disk(), Target.ball([0.0, 0.0], a), [r, 0.0], 20.0, cfg(20_000, 1e-3))
    ref = math.log(1 / r) / math.log(1 / a)
    assert abs(est.p_hat - ref) <= 3 * est.null_std_err(ref) + 5e-3


def test_target_containing_start_is_hit_immediately():
    est = killed_hit_prob(Disk(), Target.everywhere(), [0.0, 0.0], 1.0, cfg(1000))
    assert est.p_hat == 1.0
    est = killed_hit_prob(Disk(), Target.nowhere(), [0.0, 0.0], 0.05, cfg(1000))
    assert est.p_hat == 0.0


def test_occupation_time_of_whole_interval():
    x, t = math.pi / 2, 1.0
    k = 2 * np.arange(400) + 1
    ref = float(np.sum(4 / (math.pi * k**3) * np.sin(k * x) * (1 - np.exp(-k * k * t))))
    est = occupation_time(Interval(), lambda y: np.ones(y.shape[0], bool), [x], t, cfg(20_000, 1e-3))
    assert abs(est.mean - ref) <= 3 * est.std_err + 2e-3


def test_sphere_walk_first_harmonic():
    t = 0.3
    pts = sphere_walk([0.0, 0.0, 1.0], t, cfg(40_000, 5e-3))
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    z = pts[:, 2]
    assert abs(z.mean() - math.exp(-2 * t)) <= 3 * z.std() / math.sqrt(z.size)


def test_statuses_and_final_time():
    res = simulate(Disk(), [0.0, 0.0], 0.2, cfg(4000, 7e-3))
    assert set(np.unique(res.status)) <= {ALIVE, KILLED}
    assert res.t == pytest.approx(0.2)
    alive = res.status == ALIVE
    assert np.all(Disk().contains(res.position[alive]))


def test_invalid_inputs():
    with pytest.raises(GeometryError):
        mc_exit_prob(Circle(), [0.0], 1.0, cfg())
    with pytest.raises(GeometryError):
        mc_exit_prob(Disk(), [2.0, 0.0], 1.0, cfg())
    with pytest.raises(ValueError):
        simulate(Disk(), [0.0, 0.0], 1000.0, cfg())
    for bad in [dict(n_paths=10), dict(dt=0.0), dict(boundary_correction="reflect"), dict(threads=0), dict(seed=-1)]:
        with pytest.raises(ValueError):
            PathEnsembleConfig(**bad)


@given(st.integers(0, 500), st.integers(500, 10_000))
def test_hit_estimate_properties(hits, n):
    e = HitEstimate.from_counts(hits, n, 1.0)
    assert 0 <= e.p_hat <= 1
    assert e.std_err == pytest.approx(math.sqrt(e.p_hat * (1 - e.p_hat) / n))
    assert e.agrees_with(e.p_hat)


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.3))
def test_exit_probability_monotone_in_time(x, t):
    # coupled paths: exiting by t implies exiting by any later time
    a = mc_exit_prob(Interval(0, 1), [x], t, cfg(500, 1e-2, max_time=2.0))
    b = mc_exit_prob(Interval(0, 1), [x], t + 0.1, cfg(500, 1e-2, max_time=2.0))
    assert a.hits <= b.hits + 25
