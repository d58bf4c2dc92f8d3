"""Model geometries: membership, boundary distance, volume, sampling and grids.

Every domain accepts points as arrays of shape ``(..., dim)`` (a bare float is
fine for one-dimensional domains) and answers vectorised queries.  Closed
geometries (circle, flat torus, round sphere) have no boundary; their
``boundary_distance`` is ``+inf`` so callers can treat all variants alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2

SPHERE_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for invalid geometry parameters or queries."""


@dataclass(frozen=True)
class Point:
    """A single point; sphere points are embedded unit 3-vectors."""

    coords: tuple
    chart: str = "euclidean"

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in np.atleast_1d(self.coords)))
        if self.chart not in ("euclidean", "sphere-embedded"):
            raise GeometryError(f"unknown chart {self.chart!r}")
        if self.chart == "sphere-embedded":
            if len(self.coords) != 3:
                raise GeometryError("sphere points are 3-vectors")
            if abs(math.sqrt(sum(c * c for c in self.coords)) - 1.0) > SPHERE_TOL:
                raise GeometryError("sphere point is not on the unit sphere")

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce ``x`` to a float array of shape (..., dim).

    Returns the array and whether the input was a single point.
    """
    arr = np.asarray(x, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != dim:
        raise GeometryError(f"point dimension {arr.shape[-1]} does not match domain dimension {dim}")
    return arr, arr.ndim == 1


def _finish(values: np.ndarray, single: bool):
    if single:
        v = values.reshape(())
        return v.item()
    return values


@dataclass(frozen=True)
class Grid:
    """Node lattice over a domain's bounding box.

    ``labels`` marks each node as EXTERIOR, INTERIOR or BOUNDARY (a
    non-interior node with an interior axis neighbour).
    """

    domain: Any
    axes: tuple
    spacing: tuple
    labels: np.ndarray
    periodic: bool = False

    @property
    def shape(self) -> tuple:
        return self.labels.shape

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``labels.shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)


class Domain:
    """Common behaviour shared by all model geometries."""

    dim: int = 1
    closed: bool = False

    # subclasses implement the vectorised kernels
    def _contains(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _distance(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def min_feature(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.min(hi - lo))

    def contains(self, x):
        pts, single = as_points(x, self.dim)
        return _finish(self._contains(pts), single)

    def boundary_distance(self, x, check: bool = True):
        """Distance to the boundary (``inf`` for closed geometries).

        With ``check`` set, points outside the closure raise GeometryError.
        """
        pts, single = as_points(x, self.dim)
        d = self._distance(pts)
        if check and not self.closed:
            if np.any(~self._contains(pts) & (d > 1e-12)):
                raise GeometryError("point lies outside the domain")
        return _finish(d, single)

    def sample_uniform(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Uniform samples by rejection from the bounding box."""
        n = 1 if size is None else int(size)
        lo, hi = self.bounding_box()
        out = np.empty((0, self.dim))
        while out.shape[0] < n:
            batch = max(64, 2 * (n - out.shape[0]))
            cand = lo + (hi - lo) * rng.random((batch, self.dim))
            out = np.concatenate([out, cand[self._contains(cand)]])
        out = out[:n]
        return out[0] if size is None else out

    def _grid_counts(self, h: float) -> tuple:
        lo, hi = self.bounding_box()
        return lo, hi, [max(2, int(round((b - a) / h))) for a, b in zip(lo, hi)]

    def make_grid(self, h: float) -> Grid:
        if not h > 0:
            raise GeometryError("grid spacing must be positive")
        if h >= self.min_feature:
            raise GeometryError(f"h={h} cannot resolve a feature of size {self.min_feature}")
        lo, hi, counts = self._grid_counts(h)
        axes = tuple(np.linspace(a, b, m + 1) for a, b, m in zip(lo, hi, counts))
        spacing = tuple(float((b - a) / m) for a, b, m in zip(lo, hi, counts))
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        # nodes that sit on the boundary up to rounding are not interior
        inside = self._contains(mesh) & (self._distance(mesh) > 1e-9 * h)
        labels = np.where(inside, INTERIOR, EXTERIOR).astype(np.int8)
        near = np.zeros_like(inside)
        for ax in range(self.dim):
            shifted = np.zeros_like(inside)
            sl_a = [slice(None)] * self.dim
            sl_b = [slice(None)] * self.dim
            sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
            shifted[tuple(sl_a)] |= inside[tuple(sl_b)]
            shifted[tuple(sl_b)] |= inside[tuple(sl_a)]
            near |= shifted
        labels[near & ~inside] = BOUNDARY
        return Grid(self, axes, spacing, labels)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not (np.all(np.asarray(value, dtype=float) > 0) and np.all(np.isfinite(value))):
            raise GeometryError(f"{name} must be finite and strictly positive")


@dataclass(frozen=True)
class Interval(Domain):
    a: float = 0.0
    b: float = math.pi
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        _check_positive(length=self.b - self.a)

    def _contains(self, x):
        return (x[..., 0] > self.a) & (x[..., 0] < self.b)

    def _distance(self, x):
        return np.maximum(np.minimum(x[..., 0] - self.a, self.b - x[..., 0]), 0.0)

    def volume(self):
        return float(self.b - self.a)

    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    @property
    def min_feature(self):
        return (self.b - self.a) / 2


@dataclass(frozen=True)
class Rectangle(Domain):
    """Axis-aligned box ``(0, w_1) x ... x (0, w_n)``."""

    widths: tuple = (math.pi, math.pi)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        _check_positive(widths=self.widths)

    @property
    def dim(self):
        return len(self.widths)

    def _contains(self, x):
        w = np.asarray(self.widths)
        return np.all((x > 0) & (x < w), axis=-1)

    def _distance(self, x):
        w = np.asarray(self.widths)
        return np.maximum(np.min(np.minimum(x, w - x), axis=-1), 0.0)

    def volume(self):
        return float(np.prod(self.widths))

    def bounding_box(self):
        return np.zeros(self.dim), np.asarray(self.widths)

    @property
    def min_feature(self):
        return min(self.widths) / 2


@dataclass(frozen=True)
class Disk(Domain):
    """Ball of the given radius centred at the origin of R^dim."""

    radius: float = 1.0
    dim: int = 2

    def __post_init__(self):
        _check_positive(radius=self.radius)
        if self.dim < 2:
            raise GeometryError("use Interval for one-dimensional balls")

    def _contains(self, x):
        return np.sum(x * x, axis=-1) < self.radius**2

    def _distance(self, x):
        return np.abs(self.radius - np.sqrt(np.sum(x * x, axis=-1)))

    def volume(self):
        n = self.dim
        return float(math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n)

    def bounding_box(self):
        r = np.full(self.dim, self.radius)
        return -r, r

    @property
    def min_feature(self):
        return self.radius / 2


@dataclass(frozen=True)
class Dumbbell(Domain):
    """Two ``lobe x lobe`` squares joined by a centred horizontal channel.

    Left lobe ``[0, L]^2``, channel ``[L, L + len] x [L/2 - w/2, L/2 + w/2]``,
    right lobe ``[L + len, 2L + len] x [0, L]``.
    """

    lobe_size: float = 1.0
    channel_width: float = 0.05
    channel_length: float = 1.0
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        _check_positive(lobe_size=self.lobe_size, channel_width=self.channel_width,
                        channel_length=self.channel_length)
        if not self.channel_width < self.lobe_size:
            raise GeometryError("channel_width must be smaller than lobe_size")

    @property
    def channel_y(self) -> tuple[float, float]:
        c = self.lobe_size / 2
        return c - self.channel_width / 2, c + self.channel_width / 2

    @property
    def channel_midpoint(self) -> np.ndarray:
        return np.array([self.lobe_size + self.channel_length / 2, self.lobe_size / 2])

    @property
    def min_feature(self):
        return self.channel_width

    def vertices(self) -> np.ndarray:
        L, ln = self.lobe_size, self.channel_length
        y0, y1 = self.channel_y
        return np.array([
            (0, 0), (L, 0), (L, y0), (L + ln, y0), (L + ln, 0), (2 * L + ln, 0),
            (2 * L + ln, L), (L + ln, L), (L + ln, y1), (L, y1), (L, L), (0, L),
        ], dtype=float)

    def _contains(self, x):
        L, ln = self.lobe_size, self.channel_length
        y0, y1 = self.channel_y
        px, py = x[..., 0], x[..., 1]
        box = (px > 0) & (px < 2 * L + ln) & (py > 0) & (py < L)
        return box & ((px < L) | (px > L + ln) | ((py > y0) & (py < y1)))

    def _distance(self, x):
        v = self.vertices()
        a, b = v, np.roll(v, -1, axis=0)
        return _segment_distance(x, a, b).min(axis=-1)

    def volume(self):
        return float(2 * self.lobe_size**2 + self.channel_width * self.channel_length)

    def bounding_box(self):
        return np.zeros(2), np.array([2 * self.lobe_size + self.channel_length, self.lobe_size])


def _segment_distance(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from points (..., 2) to segments a[k]-b[k]; result (..., K)."""
    d = b - a
    rel = x[..., None, :] - a
    s = np.clip(np.sum(rel * d, axis=-1) / np.sum(d * d, axis=-1), 0.0, 1.0)
    diff = rel - s[..., None] * d
    return np.sqrt(np.sum(diff * diff, axis=-1))


def segment_distance(x, a, b) -> np.ndarray:
    """Euclidean distance from planar points to the segment ``a``-``b``."""
    pts = np.asarray(x, dtype=float)
    return _segment_distance(pts, np.asarray(a, float)[None], np.asarray(b, float)[None])[..., 0]


class _ClosedDomain(Domain):
    closed = True

    def _contains(self, x):
        return np.all(np.isfinite(x), axis=-1)

    def _distance(self, x):
        return np.full(x.shape[:-1], np.inf)

    def contains(self, x):
        pts, single = as_points(x, self.dim)
        if not np.all(self._contains(pts)):
            raise GeometryError("invalid chart coordinates")
        return _finish(np.ones(pts.shape[:-1], dtype=bool), single)


@dataclass(frozen=True)
class Circle(_ClosedDomain):
    """Circle of the given circumference, coordinate ``x`` in ``[0, C)``."""

    circumference: float = 2 * math.pi
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        _check_positive(circumference=self.circumference)

    def volume(self):
        return float(self.circumference)

    def bounding_box(self):
        return np.zeros(1), np.array([self.circumference])

    def make_grid(self, h):
        n = max(3, int(round(self.circumference / h)))
        axes = (np.arange(n) * self.circumference / n,)
        return Grid(self, axes, (self.circumference / n,), np.full(n, INTERIOR, np.int8), periodic=True)


@dataclass(frozen=True)
class Torus2(_ClosedDomain):
    """Flat torus ``R^2 / (P_1 Z x P_2 Z)``."""

    periods: tuple = (2 * math.pi, 2 * math.pi)
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if len(self.periods) != 2:
            raise GeometryError("Torus2 needs two periods")
        _check_positive(periods=self.periods)

    def volume(self):
        return float(self.periods[0] * self.periods[1])

    def bounding_box(self):
        return np.zeros(2), np.asarray(self.periods)

    def make_grid(self, h):
        counts = [max(3, int(round(p / h))) for p in self.periods]
        axes = tuple(np.arange(m) * p / m for m, p in zip(counts, self.periods))
        spacing = tuple(p / m for m, p in zip(counts, self.periods))
        return Grid(self, axes, spacing, np.full(counts, INTERIOR, np.int8), periodic=True)


@dataclass(frozen=True)
class Sphere2(_ClosedDomain):
    """Round unit sphere, points are embedded unit 3-vectors."""

    dim: int = field(default=3, init=False)

    def _contains(self, x):
        return np.abs(np.sqrt(np.sum(x * x, axis=-1)) - 1.0) <= SPHERE_TOL

    def volume(self):
        return 4 * math.pi

    def bounding_box(self):
        return -np.ones(3), np.ones(3)

    def sample_uniform(self, rng, size=None):
        n = 1 if size is None else int(size)
        z = rng.standard_normal((n, 3))
        z /= np.linalg.norm(z, axis=-1, keepdims=True)
        return z[0] if size is None else z

    def make_grid(self, h):
        raise GeometryError("Sphere2 has no lattice grid; use quadrature instead")

    @staticmethod
    def geodesic_distance(x, y) -> np.ndarray:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        cross = np.linalg.norm(np.cross(x, y), axis=-1)
        return np.arctan2(cross, np.sum(x * y, axis=-1))

    @staticmethod
    def from_angles(theta, omega) -> np.ndarray:
        """Polar angle ``theta`` from the north pole, azimuth ``omega``."""
        theta = np.asarray(theta, float)
        omega = np.asarray(omega, float)
        st = np.sin(theta)
        return np.stack([st * np.cos(omega), st * np.sin(omega), np.cos(theta)], axis=-1)

    @staticmethod
    def to_angles(x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, float)
        theta = np.arctan2(np.hypot(x[..., 0], x[..., 1]), x[..., 2])
        omega = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * math.pi)
        return theta, omega


@dataclass(frozen=True)
class TubeSpec:
    """Metric neighbourhood of width ``width`` around a nodal set.

    ``base`` is anything exposing ``nodal_distance(x)`` (an eigenmode, or an
    explicit curve object).
    """

    base: Any
    width: float

    def __post_init__(self):
        _check_positive(width=self.width)

    def contains(self, x):
        return np.asarray(self.base.nodal_distance(x)) <= self.width


# Functional spellings used by the drivers and the CLI.

def contains(domain: Domain, p) -> Any:
    return domain.contains(p)


def boundary_distance(domain: Domain, p) -> Any:
    return domain.boundary_distance(p)


def volume(domain: Domain) -> float:
    return domain.volume()


def sample_uniform(domain: Domain, rng: np.random.Generator, size: Optional[int] = None):
    return domain.sample_uniform(rng, size)


def make_grid(domain: Domain, h: float) -> Grid:
    return domain.make_grid(h)


DOMAIN_TYPES = {
    "interval": Interval,
    "rectangle": Rectangle,
    "disk": Disk,
    "dumbbell": Dumbbell,
    "circle": Circle,
    "torus2": Torus2,
    "sphere2": Sphere2,
}


def domain_from_record(record: dict) -> Domain:
    """Build a domain from a tagged record such as ``{"variant": "disk", "radius": 1}``."""
    rec = dict(record)
    variant = str(rec.pop("variant", "")).lower()
    if variant not in DOMAIN_TYPES:
        raise GeometryError(f"unknown domain variant {variant!r}")
    for key in ("widths", "periods"):
        if key in rec and not isinstance(rec[key], (list, tuple)):
            rec[key] = (rec[key],)
    try:
        return DOMAIN_TYPES[variant](**rec)
    except TypeError as exc:
        raise GeometryError(f"bad fields for {variant}: {exc}") from None


def parse_domain(text: str) -> Domain:
    """Parse ``variant(arg, ...)`` or ``variant:key=value,...`` into a domain.

    Examples: ``disk(1.0)``, ``interval(0,3.14159)``, ``rectangle(3.14,3.14)``,
    ``dumbbell(1,0.05,1)``, ``sphere2``.
    """
    text = text.strip()
    name, _, rest = text.partition("(")
    name = name.strip().lower()
    args: Sequence[float] = []
    if rest:
        inner = rest.rstrip(")").strip()
        args = [float(eval_number(a)) for a in inner.split(",") if a.strip()]
    if name == "interval":
        return Interval(*args) if args else Interval()
    if name == "rectangle":
        return Rectangle(tuple(args)) if args else Rectangle()
    if name == "disk":
        return Disk(args[0], int(args[1])) if len(args) > 1 else Disk(*args)
    if name == "dumbbell":
        return Dumbbell(*args)
    if name == "circle":
        return Circle(*args)
    if name == "torus2":
        return Torus2(tuple(args)) if args else Torus2()
    if name == "sphere2":
        return Sphere2()
    raise GeometryError(f"unknown domain {text!r}")


def eval_number(token: str) -> float:
    """Read a float, allowing ``pi`` and simple ``k*pi`` / ``pi/k`` forms."""
    tok = token.strip().lower().replace(" ", "")
    if "pi" not in tok:
        return float(tok)
    num = tok.replace("pi", repr(math.pi))
    parts = num.replace("/", "*/").split("*")
    value = 1.0
    for part in parts:
        if part.startswith("/"):
            value /= float(part[1:])
        elif part:
            value *= float(part)
    return value
