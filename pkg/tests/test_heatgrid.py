import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab import eigenmodel as em
from heatlab import heatgrid as hg
from heatlab.geometry import Disk, Dumbbell, Interval, Rectangle
from heatlab.stochastic import PathEnsembleConfig, mc_exit_prob


def interval_survival(x, t, terms=400):
    k = 2 * np.arange(terms) + 1
    return float(np.sum(4 / (math.pi * k) * np.sin(k * x) * np.exp(-k * k * t)))


def test_interval_heat_content_centre_value():
    f = hg.solve_heat_content(Interval(), 0.5, 1e-3)
    assert f.at([math.pi / 2]) == pytest.approx(1 - interval_survival(math.pi / 2, 0.5), abs=1e-3)


def test_interval_heat_content_crank_nicolson_path():
    f = hg.solve_heat_content(Interval(), 0.5, 1e-2, method="cn")
    assert f.at([1.0]) == pytest.approx(1 - interval_survival(1.0, 0.5), abs=1e-3)


def test_heat_content_equilibrium_and_range():
    f = hg.solve_heat_content(Interval(), 40.0, 1e-2)
    assert f.integral == pytest.approx(math.pi, rel=1e-6)
    g = hg.solve_heat_content(Disk(), 0.05, 0.02)
    vals = g.values[g.mask]
    assert vals.min() >= 0 and vals.max() <= 1


def test_heat_content_zero_time():
    f = hg.solve_heat_content(Rectangle((1.0, 1.0)), 0.0, 0.05)
    assert np.all(f.values[f.mask] == 0)


@pytest.mark.parametrize("dom,x,times,h", [
    (Interval(), [1.0], (0.05, 0.2, 0.8), 1e-3),
    (Rectangle((math.pi, math.pi)), [1.0, 1.5], (0.05, 0.2, 0.8), 1e-2),
    (Disk(), [0.3, 0.0], (0.02, 0.05, 0.1), 1e-2),
    (Dumbbell(), [0.5, 0.5], (0.02, 0.05, 0.1), 1e-2),
], ids=["interval", "rectangle", "disk", "dumbbell"])
def test_heat_content_agrees_with_monte_carlo(dom, x, times, h):
    for t in times:
        grid_val = hg.solve_heat_content(dom, t, h).at(x)
        est = mc_exit_prob(dom, x, t, PathEnsembleConfig(n_paths=20_000, dt=min(1e-3, t / 50)))
        assert abs(est.p_hat - grid_val) <= 3 * est.null_std_err(grid_val) + 1e-3


def test_semigroup_on_eigenmode_decays_exponentially():
    t = 0.3
    mode = em.RectangleMode(1, 2)
    f = hg.solve_dirichlet_semigroup(Rectangle(), mode.evaluate, t, 0.02)
    x = [1.0, 0.7]
    assert f.at(x) == pytest.approx(math.exp(-mode.eigenvalue * t) * mode(x), rel=1e-3)
    g = hg.solve_dirichlet_semigroup(Disk(), em.DiskMode(1, 0).evaluate, t, 0.01)
    lam = em.DiskMode(1, 0).eigenvalue
    assert g.at([0.2, 0.1]) == pytest.approx(math.exp(-lam * t) * em.DiskMode(1, 0)([0.2, 0.1]), rel=5e-3)


def test_semigroup_identity_and_positivity():
    f0 = lambda x: np.exp(-np.sum((x - 1.5) ** 2, axis=-1))
    z = hg.solve_dirichlet_semigroup(Rectangle(), f0, 0.0, 0.05)
    coords = z.grid.coordinates()[z.mask]
    assert np.allclose(z.values[z.mask], f0(coords))
    u = hg.solve_dirichlet_semigroup(Dumbbell(), lambda x: np.ones(len(x)), 0.05, 0.02)
    assert u.values[u.mask].min() >= 0


def test_heat_content_identity_examples():
    row = hg.check_heat_content_identity(Interval(), em.IntervalMode(1), 0.5, 1e-3)
    assert row["rhs"] == pytest.approx((1 - math.exp(-0.5)) * 2, abs=1e-12)
    assert row["rhs"] == pytest.approx(0.786939, abs=1e-6)
    assert row["residual"] <= 1e-3
    row = hg.check_heat_content_identity(Rectangle(), em.RectangleMode(1, 1), 0.25, 1e-2)
    assert row["rhs"] == pytest.approx((1 - math.exp(-0.5)) * 4, rel=1e-12)
    assert row["residual"] <= 1e-3
    tiny = hg.check_heat_content_identity(Interval(), em.IntervalMode(1), 1e-6, 1e-2)
    assert tiny["lhs"] < 1e-4 and tiny["rhs"] < 1e-5


def test_heat_content_richardson_improves():
    row = hg.check_heat_content_identity(Interval(), em.IntervalMode(1), 0.1, 1e-3, richardson=True)
    assert row["residual_extrapolated"] < row["residual"]
    assert row["residual_extrapolated"] <= 1e-4


def test_heat_content_per_nodal_domain_on_higher_mode():
    row = hg.check_heat_content_identity(Interval(), em.IntervalMode(3), 0.1, 1e-3, richardson=True)
    assert row["residual"] <= 2e-3
    assert row["residual_extrapolated"] <= 1e-4


def test_p_norm_identity():
    row = hg.check_p_norm_identity(Interval(), em.IntervalMode(1), 2.0, 0.25, 1e-3)
    assert row["holds"] and row["deficit"] > 0
    assert row["deficit"] == pytest.approx(row["deficit_duhamel"], rel=1e-3)
    near = hg.check_p_norm_identity(Interval(), em.IntervalMode(1), 1.01, 0.25, 1e-3)
    assert 0 <= near["deficit"] < 0.05 * row["deficit"]
    rect = hg.check_p_norm_identity(Rectangle(), em.RectangleMode(1, 1), 2.0, 0.25, 2e-2)
    assert rect["holds"] and rect["deficit"] > 0


def test_eigenvalues_converge_at_second_order():
    lams = [hg.dirichlet_eigenpair(Interval(), 1, h)[0] for h in (0.04, 0.02)]
    err = [abs(l - 1.0) for l in lams]
    assert err[1] < 1e-3
    assert 3.5 < err[0] / err[1] < 4.5
    lam_r = hg.dirichlet_eigenpair(Rectangle(), 1, 0.02)[0]
    assert lam_r == pytest.approx(2.0, abs=2e-3)
    lam_d = hg.dirichlet_eigenpair(Disk(), 1, 0.02)[0]
    assert lam_d == pytest.approx(em.DiskMode(1, 0).eigenvalue, rel=2e-3)


def test_second_eigenpair_interval():
    lam, f = hg.dirichlet_eigenpair(Interval(), 2, 0.01)
    assert lam == pytest.approx(4.0, rel=1e-3)
    assert len(hg.nodal_domains(f.values, f.mask)) == 2
    assert np.max(np.abs(f.values)) == pytest.approx(1.0)


def test_dumbbell_ground_state_channel_suppression():
    lam_c, fc = hg.dirichlet_eigenpair(Dumbbell(), 1, 0.02)
    lam_f, ff = hg.dirichlet_eigenpair(Dumbbell(), 1, 0.01)
    assert abs(lam_f - lam_c) / lam_f < 0.01
    for f in (fc, ff):
        xs = f.grid.coordinates()[..., 0]
        channel = f.mask & (xs > 1.0) & (xs < 2.0)
        assert np.max(np.abs(f.values[channel])) <= 0.2


def test_nodal_domains_labels():
    mask = np.ones((5, 5), bool)
    vals = np.where(np.arange(5)[:, None] < 2, 1.0, -1.0) * np.ones((5, 5))
    doms = hg.nodal_domains(vals, mask)
    assert len(doms) == 2


def test_csv_export(tmp_path):
    f = hg.solve_heat_content(Rectangle((1.0, 1.0)), 0.01, 0.1)
    path = tmp_path / "field.csv"
    f.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) > 10


@given(st.floats(0.005, 0.5))
def test_heat_content_monotone_in_time(t):
    a = hg.solve_heat_content(Interval(), t, 2e-2).values
    b = hg.solve_heat_content(Interval(), t * 1.5, 2e-2).values
    assert np.all(b >= a - 1e-10)
