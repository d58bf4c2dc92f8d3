"""Closed-form Laplace eigenfunctions with exact nodal geometry.

Every mode stores its unnormalized closed form; callers pick a normalization.
Tube masses ``int_{T_r} |phi|^p`` are computed from the exact nodal set by
piecewise Gauss-Legendre quadrature whose pieces follow the kinks of the tube
indicator, so the integrands are smooth on every piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special

from .geometry import (Circle, Disk, Domain, GeometryError, Interval, Rectangle, Sphere2, Torus2,
                       as_points, _finish)
from .theta import bessel_j, bessel_j_prime, bessel_zero

QUAD_RTOL = 1e-10
QUAD_CAP = 8192


class QuadratureError(ArithmeticError):
    """Raised when order doubling does not reach the requested tolerance."""


@lru_cache(maxsize=64)
def _gl_nodes(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre(f: Callable, a: float, b: float, order: int) -> float:
    if b <= a:
        return 0.0
    x, w = _gl_nodes(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(w, f(mid + half * x)))


def piecewise_integral(f: Callable, edges, rtol: float = QUAD_RTOL, order: int = 16,
                       cap: int = QUAD_CAP, sqrt_points=()) -> float:
    """Integrate ``f`` over consecutive pieces, doubling the order until stable.

    Pieces whose left end is in ``sqrt_points`` (where f has a square-root
    singularity) are mapped through x = a + (b - a) u^2.
    """
    edges = np.unique(np.asarray(edges, float))
    graded = np.asarray(sqrt_points, float)

    def piece(a, b, order):
        if graded.size and np.any(np.abs(graded - a) <= 1e-14 * max(1.0, abs(a))):
            return gauss_legendre(lambda u: f(a + (b - a) * u * u) * 2 * (b - a) * u, 0.0, 1.0, order)
        return gauss_legendre(f, a, b, order)

    prev = None
    while order <= cap:
        total = sum(piece(a, b, order) for a, b in zip(edges[:-1], edges[1:]))
        if prev is not None and abs(total - prev) <= rtol * max(abs(total), 1e-300):
            return total
        prev = total
        order *= 2
    raise QuadratureError(f"no convergence after order {cap // 2}")


def sin_power_integral(p: float, u0, u1):
    """int_{u0}^{u1} |sin u|^p du for 0 <= u0 <= u1 <= pi/2, vectorized in the limits."""
    u0 = np.asarray(u0, float)
    u1 = np.asarray(u1, float)
    if p == 1:
        return np.cos(u0) - np.cos(u1)
    if p == 2:
        return 0.5 * (u1 - u0) - 0.25 * (np.sin(2 * u1) - np.sin(2 * u0))
    x, w = _gl_nodes(64)
    mid = 0.5 * (u0 + u1)[..., None]
    half = 0.5 * (u1 - u0)[..., None]
    return np.sum(w * np.abs(np.sin(mid + half * x)) ** p * half, axis=-1)


def half_wave_mass(p: float, fraction: float = 1.0) -> float:
    """int_0^pi |sin u|^p du restricted to the part within ``fraction*pi/2`` of a zero."""
    c = min(max(fraction, 0.0), 1.0) * math.pi / 2
    return 2.0 * float(sin_power_integral(p, 0.0, c))


@dataclass(frozen=True)
class QuadratureSpec:
    scheme: str = "tensor-Gauss-Legendre"
    order: int = 64

    SCHEMES = ("tensor-Gauss-Legendre", "lat-long-with-sin-weight", "uniform-trapezoid")

    def __post_init__(self):
        if self.scheme not in self.SCHEMES:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.order < 1:
            raise ValueError("order must be positive")


def default_quadrature(domain: Domain, order: int = 64) -> QuadratureSpec:
    if isinstance(domain, Sphere2):
        return QuadratureSpec("lat-long-with-sin-weight", order)
    if isinstance(domain, (Circle, Torus2)):
        return QuadratureSpec("uniform-trapezoid", order)
    return QuadratureSpec("tensor-Gauss-Legendre", order)


def quadrature_rule(domain: Domain, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (in the domain's coordinates) and weights of a product rule."""
    n = quad.order
    if isinstance(domain, Sphere2):
        x, w = _gl_nodes(n)
        theta = 0.5 * math.pi * (x + 1)
        wt = 0.5 * math.pi * w * np.sin(theta)
        omega = np.arange(2 * n) * math.pi / n
        T, O = np.meshgrid(theta, omega, indexing="ij")
        W = np.outer(wt, np.full(2 * n, math.pi / n))
        return Sphere2.from_angles(T, O).reshape(-1, 3), W.reshape(-1)
    if isinstance(domain, Disk):
        if domain.dim != 2:
            raise GeometryError("quadrature is available for planar disks only")
        x, w = _gl_nodes(n)
        rho = 0.5 * domain.radius * (x + 1)
        wr = 0.5 * domain.radius * w * rho
        phi = np.arange(2 * n) * math.pi / n
        R, P = np.meshgrid(rho, phi, indexing="ij")
        W = np.outer(wr, np.full(2 * n, math.pi / n))
        pts = np.stack([R * np.cos(P), R * np.sin(P)], axis=-1)
        return pts.reshape(-1, 2), W.reshape(-1)
    lo, hi = domain.bounding_box()
    axes, weights = [], []
    for a, b in zip(lo, hi):
        if quad.scheme == "uniform-trapezoid":
            pts = a + (b - a) * np.arange(n) / n
            wts = np.full(n, (b - a) / n)
        else:
            x, w = _gl_nodes(n)
            pts = 0.5 * (a + b) + 0.5 * (b - a) * x
            wts = 0.5 * (b - a) * w
        axes.append(pts)
        weights.append(wts)
    grids = np.meshgrid(*axes, indexing="ij")
    W = weights[0]
    for wk in weights[1:]:
        W = np.multiply.outer(W, wk)
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    if not isinstance(domain, (Interval, Rectangle, Circle, Torus2)):
        raise GeometryError(f"no quadrature for {type(domain).__name__}")
    return pts, W.reshape(-1)


def integrate(domain: Domain, f: Callable, quad: Optional[QuadratureSpec] = None) -> float:
    quad = quad or default_quadrature(domain)
    pts, w = quadrature_rule(domain, quad)
    return float(np.dot(w, np.asarray(f(pts), float).reshape(-1)))


class Eigenmode:
    """Shared interface; subclasses provide the closed forms."""

    domain: Domain
    dirichlet = False

    @property
    def eigenvalue(self) -> float:
        raise NotImplementedError

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _nodal_distance(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x) -> tuple[np.ndarray, bool]:
        pts, single = as_points(x, self.domain.dim)
        pts = pts.reshape(-1, self.domain.dim)
        if isinstance(self.domain, (Circle, Torus2)):
            lo, hi = self.domain.bounding_box()
            pts = np.mod(pts, hi - lo)
        inside = self.domain.contains(pts)
        if not np.all(inside):
            raise GeometryError("point outside the mode's domain")
        return pts, single

    def evaluate(self, x):
        pts, single = self._check(x)
        return _finish(self._eval(pts), single)

    __call__ = evaluate

    def gradient(self, x):
        pts, single = self._check(x)
        g = self._grad(pts)
        return g[0] if single else g

    def nodal_distance(self, x):
        pts, single = self._check(x)
        return _finish(np.maximum(self._nodal_distance(pts), 0.0), single)

    def lp_norm(self, p: float = 1.0) -> float:
        return self.lp_mass(p) ** (1.0 / p)

    def lp_mass(self, p: float = 1.0) -> float:
        """int |phi|^p over the whole domain."""
        raise NotImplementedError

    def tube_mass(self, r: float, p: float = 1.0) -> float:
        """int over {nodal_distance <= r} of |phi|^p."""
        raise NotImplementedError

    @property
    def label(self) -> str:
        raise NotImplementedError


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError("p must be at least 1")


def _check_r(r: float) -> None:
    if not r > 0:
        raise ValueError("tube width must be positive")


@dataclass(frozen=True)
class SineFactor:
    """sin(pi (x - a) / s) on an axis; ``halves`` half-waves of length ``s``."""

    a: float
    s: float
    halves: int

    def value(self, x):
        return np.sin(math.pi * (x - self.a) / self.s)

    def derivative(self, x):
        return math.pi / self.s * np.cos(math.pi * (x - self.a) / self.s)

    def distance(self, x):
        u = np.mod(x - self.a, self.s)
        return np.minimum(u, self.s - u)

    def mass(self, p: float) -> float:
        return self.halves * self.s / math.pi * half_wave_mass(p)

    def outside(self, r: float, p: float) -> float:
        """Mass where the distance to the nearest zero exceeds ``r``."""
        if r >= self.s / 2:
            return 0.0
        inner = 2.0 * float(sin_power_integral(p, math.pi * r / self.s, math.pi / 2))
        return self.halves * self.s / math.pi * inner

    @property
    def wavenumber(self) -> float:
        return math.pi / self.s


class _Separable(Eigenmode):
    """Products of sine factors: nodal set is a union of coordinate hyperplanes."""

    def factors(self) -> tuple:
        raise NotImplementedError

    @property
    def eigenvalue(self):
        return float(sum(f.wavenumber**2 for f in self.factors()))

    def _eval(self, x):
        out = np.ones(x.shape[0])
        for i, f in enumerate(self.factors()):
            out = out * f.value(x[:, i])
        return out

    def _grad(self, x):
        fs = self.factors()
        vals = [f.value(x[:, i]) for i, f in enumerate(fs)]
        cols = []
        for i, f in enumerate(fs):
            g = f.derivative(x[:, i])
            for j, v in enumerate(vals):
                if j != i:
                    g = g * v
            cols.append(g)
        return np.stack(cols, axis=-1)

    def laplacian(self, x):
        pts, single = self._check(x)
        return _finish(-self.eigenvalue * self._eval(pts), single)

    def _nodal_distance(self, x):
        return np.min(np.stack([f.distance(x[:, i]) for i, f in enumerate(self.factors())]), axis=0)

    def lp_mass(self, p=1.0):
        _check_p(p)
        return float(np.prod([f.mass(p) for f in self.factors()]))

    def tube_mass(self, r, p=1.0):
        _check_p(p)
        _check_r(r)
        fs = self.factors()
        return max(self.lp_mass(p) - float(np.prod([f.outside(r, p) for f in fs])), 0.0)

    def nodal_cells(self) -> np.ndarray:
        """Side lengths of the rectangular nodal domains."""
        return np.array([f.s for f in self.factors()])


@dataclass(frozen=True)
class CircleMode(_Separable):
    k: int
    circumference: float = 2 * math.pi

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def domain(self):
        return Circle(self.circumference)

    def factors(self):
        return (SineFactor(0.0, self.circumference / (2 * self.k), 2 * self.k),)

    def zeros(self) -> np.ndarray:
        return np.arange(2 * self.k) * self.circumference / (2 * self.k)

    @property
    def label(self):
        return f"CircleMode(k={self.k})"


@dataclass(frozen=True)
class IntervalMode(_Separable):
    k: int
    a: float = 0.0
    b: float = math.pi
    dirichlet = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def domain(self):
        return Interval(self.a, self.b)

    def factors(self):
        return (SineFactor(self.a, (self.b - self.a) / self.k, self.k),)

    @property
    def label(self):
        return f"IntervalMode(k={self.k})"


@dataclass(frozen=True)
class RectangleMode(_Separable):
    m: int
    n: int
    widths: tuple = (math.pi, math.pi)
    dirichlet = True

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("indices must be >= 1")
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    @property
    def domain(self):
        return Rectangle(self.widths)

    def factors(self):
        return (SineFactor(0.0, self.widths[0] / self.m, self.m),
                SineFactor(0.0, self.widths[1] / self.n, self.n))

    @property
    def label(self):
        return f"RectangleMode({self.m},{self.n})"


@dataclass(frozen=True)
class TorusMode(_Separable):
    """sin(m x) sin(n y) on the flat torus (indices count full waves per period)."""

    m: int
    n: int
    periods: tuple = (2 * math.pi, 2 * math.pi)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("indices must be >= 1")
        object.__setattr__(self, "periods", tuple(float(w) for w in self.periods))

    @property
    def domain(self):
        return Torus2(self.periods)

    def factors(self):
        return (SineFactor(0.0, self.periods[0] / (2 * self.m), 2 * self.m),
                SineFactor(0.0, self.periods[1] / (2 * self.n), 2 * self.n))

    @property
    def label(self):
        return f"TorusMode({self.m},{self.n})"


@dataclass(frozen=True)
class DiskMode(Eigenmode):
    """J_m(j_{m,k} rho / R) cos(m theta) on the disk of radius R (Dirichlet)."""

    k: int = 1
    m: int = 0
    radius: float = 1.0
    dirichlet = True

    def __post_init__(self):
        if self.k < 1 or self.m < 0:
            raise ValueError("need k >= 1 and m >= 0")

    @property
    def domain(self):
        return Disk(self.radius, 2)

    @property
    def zero(self) -> float:
        return bessel_zero(self.m, self.k)

    @property
    def scale(self) -> float:
        return self.zero / self.radius

    @property
    def eigenvalue(self):
        return self.scale**2

    @property
    def label(self):
        return f"DiskMode(k={self.k},m={self.m})"

    def radial(self, rho):
        return bessel_j(self.m, self.scale * np.asarray(rho, float))

    def radial_derivative(self, rho):
        return self.scale * bessel_j_prime(self.m, self.scale * np.asarray(rho, float))

    def nodal_radii(self) -> np.ndarray:
        """Interior nodal circles followed by the boundary circle."""
        return np.array([bessel_zero(self.m, i) for i in range(1, self.k + 1)]) / self.scale

    def ray_angles(self) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        return (np.arange(2 * self.m) + 0.5) * math.pi / self.m

    def _eval(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        ang = np.arctan2(x[:, 1], x[:, 0])
        return self.radial(rho) * np.cos(self.m * ang)

    def _grad(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        safe = np.maximum(rho, 1e-12)
        ang = np.arctan2(x[:, 1], x[:, 0])
        dr = self.radial_derivative(rho) * np.cos(self.m * ang)
        if self.m == 0:
            dth = np.zeros_like(rho)
        elif self.m == 1:
            # J_1(a rho)/rho stays finite at the centre
            small = rho < 1e-8
            ratio = np.where(small, 0.5 * self.scale, self.radial(safe) / safe)
            dth = -ratio * np.sin(ang)
        else:
            dth = -self.m * self.radial(safe) / safe * np.sin(self.m * ang)
        c, s = np.cos(ang), np.sin(ang)
        return np.stack([dr * c - dth * s, dr * s + dth * c], axis=-1)

    def _nodal_distance(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        d = np.min(np.abs(rho[:, None] - self.nodal_radii()[None, :]), axis=1)
        if self.m:
            ang = np.arctan2(x[:, 1], x[:, 0])
            step = math.pi / self.m
            delta = np.abs(np.mod(ang, step) - 0.5 * step)
            d = np.minimum(d, rho * np.sin(np.minimum(delta, math.pi / 2)))
        return d

    def _angular_mass(self, p):
        if self.m == 0:
            return 2 * math.pi
        return 2 * self.m * half_wave_mass(p) / self.m

    def _radial_edges(self, extra=()):
        return np.concatenate([[0.0], self.nodal_radii(), np.clip(np.asarray(extra, float), 0, self.radius)])

    def lp_mass(self, p=1.0):
        _check_p(p)
        f = lambda rho: np.abs(self.radial(rho)) ** p * rho  # noqa: E731
        return piecewise_integral(f, self._radial_edges()) * self._angular_mass(p)

    def tube_mass(self, r, p=1.0):
        _check_p(p)
        _check_r(r)
        radii = self.nodal_radii()
        full_ang = self._angular_mass(p)

        def weight(rho):
            near = np.min(np.abs(rho[:, None] - radii[None, :]), axis=1) <= r
            if self.m == 0:
                ang = np.zeros_like(rho)
            else:
                a = np.arcsin(np.minimum(1.0, r / np.maximum(rho, 1e-300)))
                c = np.minimum(self.m * a, math.pi / 2)
                ang = 4.0 * sin_power_integral(p, np.zeros_like(c), c)
            return np.where(near, full_ang, ang)

        f = lambda rho: np.abs(self.radial(rho)) ** p * rho * weight(rho)  # noqa: E731
        extra = list(radii - r) + list(radii + r)
        if self.m:
            extra += [r, r / math.sin(math.pi / (2 * self.m))]
        # arcsin(r/rho) has a square-root singularity at rho = r
        return piecewise_integral(f, self._radial_edges(extra), sqrt_points=[r] if self.m else ())


def _sphere_points(x) -> tuple[np.ndarray, bool]:
    pts, single = as_points(x, 3)
    pts = pts.reshape(-1, 3)
    if not np.all(Sphere2()._contains(pts)):
        raise GeometryError("point is not on the unit sphere")
    return pts, single


class _SphereMode(Eigenmode):
    @property
    def domain(self):
        return Sphere2()

    def _check(self, x):
        return _sphere_points(x)

    @property
    def eigenvalue(self):
        return float(self.l * (self.l + 1))


@dataclass(frozen=True)
class SphereGaussianBeam(_SphereMode):
    """Re (x1 + i x2)^l restricted to S^2, i.e. sin^l(theta) cos(l omega)."""

    l: int

    def __post_init__(self):
        if not 1 <= self.l <= 1000:
            raise ValueError("l must lie in 1..1000")

    @property
    def label(self):
        return f"SphereGaussianBeam(l={self.l})"

    def _eval(self, x):
        theta, omega = Sphere2.to_angles(x)
        return np.sin(theta) ** self.l * np.cos(self.l * omega)

    def _grad(self, x):
        z = (x[:, 0] + 1j * x[:, 1]) ** (self.l - 1)
        amb = self.l * np.stack([z.real, -z.imag, np.zeros(x.shape[0])], axis=-1)
        return amb - self.l * self._eval(x)[:, None] * x

    def _nodal_distance(self, x):
        theta, omega = Sphere2.to_angles(x)
        step = math.pi / self.l
        delta = np.abs(np.mod(omega, step) - 0.5 * step)
        return np.arcsin(np.clip(np.sin(theta) * np.sin(delta), 0.0, 1.0))

    def _theta_edges(self, p, extra=()):
        sigma = 1.0 / math.sqrt(self.l * p + 1.0)
        core = math.pi / 2 + sigma * np.array([-12, -8, -5, -3, -2, -1, 0, 1, 2, 3, 5, 8, 12])
        return np.clip(np.concatenate([[0.0, math.pi], core, extra]), 0.0, math.pi)

    def lp_mass(self, p=1.0):
        _check_p(p)
        polar = piecewise_integral(lambda t: np.sin(t) ** (self.l * p + 1), self._theta_edges(p))
        return polar * 4 * self.l * half_wave_mass(p) / (2 * self.l)

    def exact_polar_integral(self, p=1.0) -> float:
        """int_0^pi sin^{lp+1} = sqrt(pi) Gamma(lp/2+1)/Gamma(lp/2+3/2)."""
        q = self.l * p
        return math.sqrt(math.pi) * math.exp(special.gammaln(q / 2 + 1) - special.gammaln(q / 2 + 1.5))

    def tube_mass(self, r, p=1.0):
        _check_p(p)
        _check_r(r)
        sr = math.sin(min(r, math.pi / 2))

        def ang(theta):
            a = np.arcsin(np.minimum(1.0, sr / np.maximum(np.sin(theta), 1e-300)))
            c = np.minimum(self.l * a, math.pi / 2)
            return 4.0 * sin_power_integral(p, np.zeros_like(c), c)

        f = lambda t: np.sin(t) ** (self.l * p + 1) * ang(t)  # noqa: E731
        extra = [r, math.pi - r]
        s = sr / math.sin(math.pi / (2 * self.l))
        if s < 1:
            extra += [math.asin(s), math.pi - math.asin(s)]
        return piecewise_integral(f, self._theta_edges(p, extra))


@dataclass(frozen=True)
class SphereZonal(_SphereMode):
    """Legendre polynomial P_l(cos theta)."""

    l: int

    def __post_init__(self):
        if not 1 <= self.l <= 1000:
            raise ValueError("l must lie in 1..1000")

    @property
    def label(self):
        return f"SphereZonal(l={self.l})"

    def nodal_latitudes(self) -> np.ndarray:
        z, _ = special.roots_legendre(self.l)
        return np.sort(np.arccos(z))

    def _eval(self, x):
        return special.eval_legendre(self.l, np.clip(x[:, 2], -1, 1))

    def _grad(self, x):
        z = np.clip(x[:, 2], -1, 1)
        l = self.l
        denom = z * z - 1
        near = np.abs(denom) < 1e-12
        safe = np.where(near, -1.0, denom)
        dp = l * (z * special.eval_legendre(l, z) - special.eval_legendre(l - 1, z)) / safe
        pole = np.sign(z) ** (l + 1) * l * (l + 1) / 2
        dp = np.where(near, pole, dp)
        ez = np.array([0.0, 0.0, 1.0])
        return dp[:, None] * (ez[None, :] - z[:, None] * x)

    def _nodal_distance(self, x):
        theta, _ = Sphere2.to_angles(x)
        return np.min(np.abs(theta[:, None] - self.nodal_latitudes()[None, :]), axis=1)

    def _mass(self, p, edges, mask=None):
        f = lambda t: np.abs(special.eval_legendre(self.l, np.cos(t))) ** p * np.sin(t)  # noqa: E731
        return 2 * math.pi * piecewise_integral(f, edges)

    def lp_mass(self, p=1.0):
        _check_p(p)
        return self._mass(p, np.concatenate([[0.0, math.pi], self.nodal_latitudes()]))

    def tube_mass(self, r, p=1.0):
        _check_p(p)
        _check_r(r)
        lat = self.nodal_latitudes()
        pieces = np.clip(np.stack([lat - r, lat + r], axis=1), 0.0, math.pi)
        merged = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        total = 0.0
        for a, b in merged:
            inner = lat[(lat > a) & (lat < b)]
            total += self._mass(p, np.concatenate([[a, b], inner]))
        return total


MODE_TYPES = {
    "circle": CircleMode,
    "interval": IntervalMode,
    "rectangle": RectangleMode,
    "torus": TorusMode,
    "disk": DiskMode,
    "sphere_beam": SphereGaussianBeam,
    "sphere_zonal": SphereZonal,
}

_POSITIONAL = {
    "circle": ("k",),
    "interval": ("k",),
    "rectangle": ("m", "n"),
    "torus": ("m", "n"),
    "disk": ("k", "m"),
    "sphere_beam": ("l",),
    "sphere_zonal": ("l",),
}


def from_record(record: dict) -> Eigenmode:
    """Build a mode from ``{"variant": "torus", "m": 2, "n": 1}``."""
    rec = dict(record)
    variant = str(rec.pop("variant", "")).lower()
    if variant not in MODE_TYPES:
        raise ValueError(f"unknown mode variant {variant!r}")
    for key in ("k", "m", "n", "l"):
        if key in rec:
            rec[key] = int(rec[key])
    try:
        return MODE_TYPES[variant](**rec)
    except TypeError as exc:
        raise ValueError(f"bad fields for {variant}: {exc}") from None


def parse_mode(text: str) -> Eigenmode:
    """Parse ``torus(3,3)``, ``circle(5)``, ``sphere_beam(50)`` and similar."""
    name, _, rest = text.strip().partition("(")
    name = name.strip().lower()
    if name not in MODE_TYPES:
        raise ValueError(f"unknown mode {text!r}")
    args = [int(a) for a in rest.rstrip(")").split(",") if a.strip()]
    keys = _POSITIONAL[name]
    if len(args) > len(keys):
        raise ValueError(f"too many indices for {name}")
    return from_record({"variant": name, **dict(zip(keys, args))})


def mode_family(name: str, indices) -> list[Eigenmode]:
    """Convenience sweep: ``mode_family("torus_diag", range(5, 41, 5))``."""
    if name == "torus_diag":
        return [TorusMode(m, m) for m in indices]
    if name == "circle":
        return [CircleMode(k) for k in indices]
    if name == "sphere_beam":
        return [SphereGaussianBeam(l) for l in indices]
    raise ValueError(f"unknown family {name!r}")


# -- oracles ---------------------------------------------------------------

def laplacian_fd(mode: Eigenmode, x, h: float = 1e-3) -> np.ndarray:
    """Fourth-order finite-difference Laplacian in chart coordinates."""
    pts = as_points(x, mode.domain.dim)[0].reshape(-1, mode.domain.dim)
    c = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
    offs = np.arange(-2, 3)
    if isinstance(mode.domain, Sphere2):
        theta, omega = Sphere2.to_angles(pts)

        def f(t, o):
            return mode._eval(Sphere2.from_angles(t, o))

        d2t = sum(ci * f(theta + k * h, omega) for ci, k in zip(c, offs)) / h**2
        d1t = (f(theta - 2 * h, omega) - 8 * f(theta - h, omega) + 8 * f(theta + h, omega)
               - f(theta + 2 * h, omega)) / (12 * h)
        d2o = sum(ci * f(theta, omega + k * h) for ci, k in zip(c, offs)) / h**2
        return d2t + np.cos(theta) / np.sin(theta) * d1t + d2o / np.sin(theta) ** 2
    out = np.zeros(pts.shape[0])
    for i in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[i] = h
        out += sum(ci * mode._eval(pts + k * e) for ci, k in zip(c, offs)) / h**2
    return out


def eigen_residual(mode: Eigenmode, x, h: float = 1e-3) -> np.ndarray:
    """|Delta phi + lambda phi| / (lambda max|phi|) at the given points."""
    pts = as_points(x, mode.domain.dim)[0].reshape(-1, mode.domain.dim)
    vals = mode._eval(pts)
    scale = mode.eigenvalue * max(np.max(np.abs(vals)), 1e-300)
    return np.abs(laplacian_fd(mode, pts, h) + mode.eigenvalue * vals) / scale


@lru_cache(maxsize=32)
def _nodal_samples(mode: Eigenmode, resolution: int) -> np.ndarray:
    if isinstance(mode.domain, Sphere2):
        t = np.linspace(1e-6, math.pi - 1e-6, resolution)
        o = np.linspace(0, 2 * math.pi, 2 * resolution)
        T, O = np.meshgrid(t, o, indexing="ij")
        coords = np.stack([T, O], axis=-1)
        to_pts = lambda c: Sphere2.from_angles(c[..., 0], c[..., 1])  # noqa: E731
    else:
        lo, hi = mode.domain.bounding_box()
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        to_pts = lambda c: c  # noqa: E731
    shape = coords.shape[:-1]
    flat = coords.reshape(-1, coords.shape[-1])
    pts = to_pts(flat)
    inside = mode.domain._contains(pts) if not mode.domain.closed else np.ones(len(pts), bool)
    vals = np.where(inside, mode._eval(np.where(inside[:, None], pts, pts[0])), np.nan).reshape(shape)
    coords_g = coords
    found = [to_pts(coords_g[vals == 0])]
    for axis in range(len(shape)):
        a = np.moveaxis(vals, axis, 0)
        ca = np.moveaxis(coords_g, axis, 0)
        change = (a[:-1] * a[1:] < 0)
        lo_c, hi_c = ca[:-1][change], ca[1:][change]
        flo = a[:-1][change]
        for _ in range(50):
            mid = 0.5 * (lo_c + hi_c)
            fm = mode._eval(to_pts(mid))
            left = np.sign(fm) == np.sign(flo)
            lo_c = np.where(left[:, None], mid, lo_c)
            flo = np.where(left, fm, flo)
            hi_c = np.where(left[:, None], hi_c, mid)
        found.append(to_pts(0.5 * (lo_c + hi_c)))
    return np.concatenate(found, axis=0)


def nodal_distance_numeric(mode: Eigenmode, x, resolution: int = 801) -> np.ndarray:
    """Distance to sign changes found by bisection on a mesh (independent oracle).

    Boundary zeros of Dirichlet modes are not sampled, so only interior nodal
    lines count; compare against the analytic value away from the boundary.
    """
    pts, single = mode._check(x)
    samples = _nodal_samples(mode, resolution)
    if isinstance(mode.domain, Sphere2):
        d = np.arccos(np.clip(pts @ samples.T, -1, 1)).min(axis=1)
    else:
        diff = pts[:, None, :] - samples[None, :, :]
        if mode.domain.closed:
            lo, hi = mode.domain.bounding_box()
            period = hi - lo
            diff = diff - period * np.round(diff / period)
        d = np.sqrt(np.sum(diff * diff, axis=-1)).min(axis=1)
    return _finish(d, single)
