import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from heatlab import eigenmodel as em
from heatlab.geometry import Disk, GeometryError, Sphere2
from heatlab.theta import bessel_zero

MODES = [
    em.CircleMode(3), em.IntervalMode(4), em.RectangleMode(2, 3), em.TorusMode(3, 2),
    em.DiskMode(1, 0), em.DiskMode(2, 1), em.DiskMode(1, 3), em.SphereGaussianBeam(4), em.SphereGaussianBeam(30),
    em.SphereZonal(3), em.SphereZonal(8),
]


def _interior_points(mode, n, seed=0):
    rng = np.random.default_rng(seed)
    dom = mode.domain
    if isinstance(dom, Sphere2):
        theta = rng.uniform(0.2, math.pi - 0.2, n)
        return Sphere2.from_angles(theta, rng.uniform(0, 2 * math.pi, n))
    if isinstance(dom, Disk):
        rho = rng.uniform(0.05, 0.95, n) * dom.radius
        ang = rng.uniform(0, 2 * math.pi, n)
        return np.stack([rho * np.cos(ang), rho * np.sin(ang)], axis=-1)
    lo, hi = dom.bounding_box()
    return lo + (hi - lo) * rng.uniform(0.02, 0.98, (n, dom.dim))


def test_evaluate_examples():
    assert em.CircleMode(3)(math.pi / 6) == pytest.approx(1.0)
    assert em.SphereGaussianBeam(2)(Sphere2.from_angles(math.pi / 2, 0.0)) == pytest.approx(1.0)
    assert em.RectangleMode(2, 1)([math.pi / 4, math.pi / 2]) == pytest.approx(1.0)


def test_eigenvalue_examples():
    assert em.SphereGaussianBeam(10).eigenvalue == 110
    assert em.RectangleMode(3, 4).eigenvalue == pytest.approx(25)
    assert em.DiskMode(1, 0).eigenvalue == pytest.approx(5.78319, abs=1e-5)
    assert em.DiskMode(1, 0).eigenvalue == pytest.approx(bessel_zero(0, 1) ** 2, rel=1e-14)
    assert em.CircleMode(7).eigenvalue == pytest.approx(49)
    assert em.TorusMode(3, 3).eigenvalue == pytest.approx(18)


def test_nodal_distance_examples():
    assert em.CircleMode(2).nodal_distance(math.pi / 8) == pytest.approx(math.pi / 8)
    assert em.RectangleMode(2, 2).nodal_distance([math.pi / 4, math.pi / 4]) == pytest.approx(math.pi / 4)
    l = 6
    assert em.SphereGaussianBeam(l).nodal_distance(Sphere2.from_angles(math.pi / 2, math.pi / (2 * l))) == \
        pytest.approx(0.0, abs=1e-12)


def test_circle_norm_and_tube_examples():
    for k in (1, 4, 10):
        assert em.CircleMode(k).lp_mass(1) == pytest.approx(4.0, rel=1e-12)
    m = em.CircleMode(10)
    assert m.tube_mass(0.05, 1) / m.lp_mass(1) == pytest.approx(1 - math.cos(0.5), rel=1e-10)
    assert 1 - math.cos(0.5) == pytest.approx(0.122417, abs=1e-6)


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.label)
def test_eigen_residual(mode):
    pts = _interior_points(mode, 50)
    assert np.max(em.eigen_residual(mode, pts)) < 1e-6


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.label)
def test_gradient_matches_central_differences(mode):
    pts = _interior_points(mode, 100, seed=1)
    g = mode.gradient(pts)
    h = 1e-6
    if isinstance(mode.domain, Sphere2):
        # compare tangential derivatives along random tangent directions
        rng = np.random.default_rng(2)
        v = rng.standard_normal(pts.shape)
        v -= np.sum(v * pts, axis=1, keepdims=True) * pts
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        fwd = np.cos(h) * pts + np.sin(h) * v
        bwd = np.cos(h) * pts - np.sin(h) * v
        fd = (mode(fwd) - mode(bwd)) / (2 * h)
        assert np.allclose(np.sum(g * v, axis=1), fd, atol=1e-6 * mode.eigenvalue)
        assert np.allclose(np.sum(g * pts, axis=1), 0.0, atol=1e-9 * mode.eigenvalue)
        return
    for ax in range(mode.domain.dim):
        e = np.zeros(mode.domain.dim)
        e[ax] = h
        fd = (mode(pts + e) - mode(pts - e)) / (2 * h)
        assert np.allclose(g[:, ax], fd, atol=1e-6)


@pytest.mark.parametrize("mode", [em.RectangleMode(2, 3), em.TorusMode(3, 2), em.DiskMode(2, 1), em.DiskMode(1, 2),
                                  em.SphereGaussianBeam(5), em.SphereZonal(4)], ids=lambda m: m.label)
def test_nodal_distance_against_mesh_oracle(mode):
    pts = _interior_points(mode, 40, seed=3)
    exact = np.asarray(mode.nodal_distance(pts))
    numeric = np.asarray(em.nodal_distance_numeric(mode, pts, resolution=401))
    if mode.dirichlet:
        # the oracle does not sample boundary zeros
        bd = np.asarray(mode.domain.boundary_distance(pts))
        keep = exact < bd - 1e-9
        exact, numeric = exact[keep], numeric[keep]
    assert np.allclose(exact, numeric, atol=2e-2)
    assert np.all(numeric >= exact - 1e-9)


def test_nodal_distance_vanishes_on_nodal_set():
    m = em.DiskMode(2, 0)
    rho = m.nodal_radii()[0]
    assert m.nodal_distance([rho, 0.0]) == pytest.approx(0.0, abs=1e-12)
    assert m(np.array([rho, 0.0])) == pytest.approx(0.0, abs=1e-12)


def _brute_mass(mode, p, n=1200, tube=None):
    """Midpoint rule on a fine chart grid; tube restricts to nodal distance <= tube."""
    dom = mode.domain
    if isinstance(dom, Sphere2):
        th = (np.arange(n) + 0.5) * math.pi / n
        om = (np.arange(2 * n) + 0.5) * math.pi / n
        T, O = np.meshgrid(th, om, indexing="ij")
        pts = Sphere2.from_angles(T, O).reshape(-1, 3)
        w = (np.sin(T) * (math.pi / n) ** 2).reshape(-1)
    elif isinstance(dom, Disk):
        r = (np.arange(n) + 0.5) / n * dom.radius
        a = (np.arange(2 * n) + 0.5) * math.pi / n
        R, A = np.meshgrid(r, a, indexing="ij")
        pts = np.stack([R * np.cos(A), R * np.sin(A)], axis=-1).reshape(-1, 2)
        w = (R * (dom.radius / n) * (math.pi / n)).reshape(-1)
    else:
        lo, hi = dom.bounding_box()
        axes = [lo[i] + (np.arange(n) + 0.5) * (hi[i] - lo[i]) / n for i in range(dom.dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dom.dim)
        w = np.full(len(pts), np.prod((hi - lo) / n))
    vals = np.abs(mode(pts)) ** p
    if tube is not None:
        vals = vals * (np.asarray(mode.nodal_distance(pts)) <= tube)
    return float(np.sum(w * vals))


@pytest.mark.parametrize("mode,p", [(em.TorusMode(2, 1), 1), (em.RectangleMode(1, 2), 2), (em.DiskMode(1, 0), 1),
                                    (em.DiskMode(2, 1), 2), (em.SphereGaussianBeam(6), 2), (em.SphereZonal(3), 1)],
                         ids=lambda v: getattr(v, "label", str(v)))
def test_lp_mass_against_brute_force(mode, p):
    assert mode.lp_mass(p) == pytest.approx(_brute_mass(mode, p, 600), rel=2e-3)


# widths of axis-parallel tubes are whole multiples of the brute-force grid spacing
@pytest.mark.parametrize("mode,r", [(em.TorusMode(2, 1), 2 * math.pi / 32), (em.DiskMode(2, 1), 0.1),
                                    (em.SphereGaussianBeam(6), 0.15), (em.SphereZonal(4), 0.1),
                                    (em.RectangleMode(3, 1), math.pi / 10)],
                         ids=lambda v: getattr(v, "label", str(v)))
def test_tube_mass_against_brute_force(mode, r):
    assert mode.tube_mass(r, 1) == pytest.approx(_brute_mass(mode, 1, 800, tube=r), rel=5e-3)


@given(st.sampled_from([em.TorusMode(3, 1), em.DiskMode(2, 1), em.SphereGaussianBeam(8), em.CircleMode(4),
                        em.SphereZonal(5)]),
       st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.sampled_from([1.0, 2.0, 4.0]))
def test_tube_mass_monotone_and_bounded(mode, r1, r2, p):
    a, b = sorted((r1, r2))
    ta, tb = mode.tube_mass(a, p), mode.tube_mass(b, p)
    full = mode.lp_mass(p)
    assert ta <= tb * (1 + 1e-9) + 1e-12
    assert tb <= full * (1 + 1e-9)


@pytest.mark.parametrize("mode", [em.CircleMode(5), em.TorusMode(2, 3), em.SphereGaussianBeam(12), em.DiskMode(1, 2)],
                         ids=lambda m: m.label)
def test_tube_saturates_at_full_norm(mode):
    assert mode.tube_mass(math.pi, 1) == pytest.approx(mode.lp_mass(1), rel=1e-9)


def test_beam_polar_integral():
    b = em.SphereGaussianBeam(20)
    for p in (1.0, 2.0):
        ref = integrate.quad(lambda t: np.sin(t) ** (20 * p + 1), 0, math.pi, epsabs=1e-14)[0]
        assert b.exact_polar_integral(p) == pytest.approx(ref, rel=1e-10)
        gam = math.sqrt(math.pi) * math.exp(special.gammaln(10 * p + 1) - special.gammaln(10 * p + 1.5))
        assert b.exact_polar_integral(p) == pytest.approx(gam, rel=1e-10)


def test_sin_power_integrals():
    for p in (1.0, 1.5, 2.0, 3.0):
        ref = integrate.quad(lambda u: np.sin(u) ** p, 0.2, 1.3)[0]
        assert em.sin_power_integral(p, 0.2, 1.3) == pytest.approx(ref, rel=1e-12)
    assert em.half_wave_mass(1.0) == pytest.approx(2.0)


def test_quadrature_rules_integrate_constants():
    for dom in (Sphere2(), Disk(), em.TorusMode(1, 1).domain, em.RectangleMode(1, 1).domain):
        assert em.integrate(dom, lambda x: np.ones(len(x))) == pytest.approx(dom.volume(), rel=1e-10)


def test_piecewise_integral_handles_kinks():
    val = em.piecewise_integral(lambda x: np.abs(x - 0.3), [0.0, 0.3, 1.0])
    assert val == pytest.approx(0.045 + 0.245, rel=1e-12)


def test_mode_records_and_parsing():
    assert em.parse_mode("torus(3,3)") == em.TorusMode(3, 3)
    assert em.parse_mode("circle(5)") == em.CircleMode(5)
    assert em.parse_mode("sphere_beam(50)") == em.SphereGaussianBeam(50)
    assert em.from_record({"variant": "disk", "k": 2, "m": 1}) == em.DiskMode(2, 1)
    assert [m.m for m in em.mode_family("torus_diag", range(5, 16, 5))] == [5, 10, 15]
    with pytest.raises(ValueError):
        em.parse_mode("hexagon(2)")


def test_invalid_inputs():
    with pytest.raises(GeometryError):
        em.DiskMode(1, 0)([2.0, 0.0])
    with pytest.raises(ValueError):
        em.CircleMode(3).tube_mass(-1.0)
    with pytest.raises(ValueError):
        em.CircleMode(3).lp_mass(0.5)
    with pytest.raises(ValueError):
        em.SphereGaussianBeam(0)


def test_periodic_wrap():
    m = em.CircleMode(3)
    assert m(0.3 + 2 * math.pi) == pytest.approx(m(0.3))
