"""Monte Carlo Brownian motion: exit probabilities, Feynman-Kac, killed hitting.

All paths follow the ``generatorDelta`` convention: increments over a step of
length ``h`` are Gaussian with variance ``2h`` per coordinate, so the
transition density is the heat kernel of ``Delta``.

Reproducibility: paths are grouped in fixed-size blocks and block ``b`` draws
from a Philox stream keyed by ``(seed, b)``.  The block layout does not depend
on the worker count, and per-block results are reduced in block order, so
estimates are bit-identical for any number of threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .geometry import Domain, GeometryError, Sphere2, as_points, segment_distance

DEFAULT_SEED = 20240611
BLOCK_SIZE = 16384
CONVENTION = "generatorDelta"

ALIVE, KILLED, HIT = 0, 1, 2


@dataclass(frozen=True)
class PathEnsembleConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    seed: int = DEFAULT_SEED
    boundary_correction: str = "brownian_bridge"
    max_time: float = 100.0
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if not (self.dt > 0 and self.max_time > 0):
            raise ValueError("dt and max_time must be positive")
        if self.dt > self.max_time:
            raise ValueError("dt must not exceed max_time")
        if self.boundary_correction not in ("none", "brownian_bridge"):
            raise ValueError("boundary_correction is 'none' or 'brownian_bridge'")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def bridge(self) -> bool:
        return self.boundary_correction == "brownian_bridge"

    def with_(self, **changes) -> "PathEnsembleConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class HitEstimate:
    p_hat: float
    std_err: float
    n_paths: int
    elapsed_model_time: float
    hits: int = 0
    convention: str = CONVENTION

    @classmethod
    def from_counts(cls, hits: int, n: int, t: float) -> "HitEstimate":
        p = hits / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), n, t, hits)

    def null_std_err(self, p0: float) -> float:
        """Binomial standard error under the hypothesis that the truth is ``p0``."""
        return math.sqrt(max(p0 * (1.0 - p0), 0.0) / self.n_paths)

    def agrees_with(self, p0: float, n_sigma: float = 3.0) -> bool:
        """Two-sided binomial z-test against a reference value."""
        se = self.null_std_err(p0)
        return abs(self.p_hat - p0) <= n_sigma * se + 1e-15


@dataclass(frozen=True)
class Estimate:
    """Mean of a path functional with its standard error."""

    mean: float
    std_err: float
    n_paths: int
    elapsed_model_time: float
    convention: str = CONVENTION


@dataclass
class PathResult:
    """Per-path outcome of one simulation: status, stopping position and
    (when requested) time spent alive inside a region."""

    status: np.ndarray
    position: np.ndarray
    t: float
    occupation: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return int(self.status.size)


class Target:
    """Target set for killed hitting: membership plus optional boundary distance.

    Without a distance function, hits are detected at step endpoints only.
    """

    def __init__(self, contains: Callable, distance: Optional[Callable] = None, name: str = "target"):
        self._contains = contains
        self._distance = distance
        self.name = name

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._contains(x), dtype=bool)

    def distance(self, x: np.ndarray) -> Optional[np.ndarray]:
        return None if self._distance is None else np.asarray(self._distance(x), dtype=float)

    @classmethod
    def ball(cls, center, radius: float) -> "Target":
        c = np.asarray(center, float)

        def dist(x):
            return np.abs(np.linalg.norm(x - c, axis=-1) - radius)

        return cls(lambda x: np.linalg.norm(x - c, axis=-1) <= radius, dist, f"ball({radius})")

    @classmethod
    def segment(cls, a, b) -> "Target":
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        return cls(lambda x: segment_distance(x, a, b) <= 0.0,
                   lambda x: segment_distance(x, a, b), "segment")

    @classmethod
    def everywhere(cls) -> "Target":
        return cls(lambda x: np.ones(x.shape[:-1], bool), None, "everywhere")

    @classmethod
    def nowhere(cls) -> "Target":
        return cls(lambda x: np.zeros(x.shape[:-1], bool), None, "empty")


def _as_target(target) -> Optional[Target]:
    if target is None or isinstance(target, Target):
        return target
    if callable(target):
        return Target(target)
    raise TypeError("target must be a Target or a predicate")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(block)))


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    sizes = []
    start = 0
    b = 0
    while start < n_paths:
        count = min(BLOCK_SIZE, n_paths - start)
        sizes.append((b, count))
        start += count
        b += 1
    return sizes


def map_blocks(cfg: PathEnsembleConfig, work: Callable[[np.random.Generator, int], object]) -> list:
    """Run ``work(rng, count)`` for every block; results come back in block order."""
    tasks = _blocks(cfg.n_paths)

    def run(task):
        b, count = task
        return work(block_rng(cfg.seed, b), count)

    if cfg.threads == 1 or len(tasks) == 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(run, tasks))


def _step_schedule(t: float, dt: float) -> list[float]:
    """Full steps of length dt followed by one shorter final step."""
    n_full = int(math.floor(t / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = t - n_full * dt
    if rest > 1e-14 * max(t, 1.0):
        steps.append(rest)
    return steps


def _simulate_block(domain: Domain, x0: np.ndarray, t: float, cfg: PathEnsembleConfig,
                    rng: np.random.Generator, count: int, target: Optional[Target],
                    region: Optional[Callable] = None):
    dim = x0.size
    status = np.full(count, ALIVE, dtype=np.int8)
    occupation = np.zeros(count)
    final = np.empty((count, dim))
    idx = np.arange(count)
    X = np.repeat(x0[None, :], count, axis=0)
    closed = domain.closed
    periods = None
    if closed:
        lo, hi = domain.bounding_box()
        periods = hi - lo
    if target is not None:
        at_start = target.contains(X)
        if at_start.any():
            status[at_start] = HIT
            final[at_start] = X[at_start]
            keep = ~at_start
            idx, X = idx[keep], X[keep]
    d1 = None if closed else domain._distance(X)
    g1 = None if target is None else target.distance(X)
    bridge = cfg.bridge
    for h in _step_schedule(t, cfg.dt):
        m = idx.size
        if m == 0:
            break
        Y = X + math.sqrt(2.0 * h) * rng.standard_normal((m, dim))
        u_kill = rng.random(m) if bridge and not closed else None
        u_hit = rng.random(m) if bridge and g1 is not None else None
        if closed:
            Y = np.mod(Y, periods)
            killed = np.zeros(m, bool)
            f_kill = None
        else:
            inside = domain._contains(Y)
            d2 = domain._distance(Y)
            killed = ~inside
            if bridge:
                p = np.exp(-np.maximum(d1, 0.0) * d2 / h)
                killed |= inside & (u_kill < p)
            with np.errstate(invalid="ignore", divide="ignore"):
                f_kill = np.where(d1 + d2 > 0, d1 / (d1 + d2), 0.0)
        if target is not None:
            hit = target.contains(Y)
            g2 = target.distance(Y)
            if g2 is not None and bridge:
                q = np.exp(-np.maximum(g1, 0.0) * g2 / h)
                hit |= u_hit < q
            if g2 is not None:
                with np.errstate(invalid="ignore", divide="ignore"):
                    f_hit = np.where(g1 + g2 > 0, g1 / (g1 + g2), 0.0)
            else:
                f_hit = np.ones(m)
            both = hit & killed
            if both.any():
                # earlier estimated crossing wins; near-ties go to killing
                hit_first = f_hit < f_kill - 1e-12
                hit &= ~both | hit_first
                killed &= ~both | ~hit_first
        else:
            hit = np.zeros(m, bool)
            g2 = None
        if region is not None:
            live = ~(killed | hit)
            occupation[idx[live]] += h * np.asarray(region(Y[live]), dtype=bool)
        stop = killed | hit
        if stop.any():
            status[idx[killed]] = KILLED
            status[idx[hit]] = HIT
            final[idx[stop]] = np.where(killed[stop, None], X[stop], Y[stop])
            keep = ~stop
            idx, X = idx[keep], Y[keep]
            if not closed:
                d1 = d2[keep]
            if g2 is not None:
                g1 = g2[keep]
        else:
            X = Y
            if not closed:
                d1 = d2
            if g2 is not None:
                g1 = g2
    final[idx] = X
    return status, final, occupation


def _sphere_block(x0: np.ndarray, t: float, cfg: PathEnsembleConfig, rng: np.random.Generator, count: int):
    X = np.repeat(x0[None, :], count, axis=0)
    ez = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    for h in _step_schedule(t, cfg.dt):
        xi = rng.standard_normal((count, 2))
        axis = np.where(np.abs(X[:, 2:3]) < 0.9, ez, ex)
        e1 = np.cross(X, axis)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(X, e1)
        v = math.sqrt(2.0 * h) * (xi[:, :1] * e1 + xi[:, 1:] * e2)
        length = np.linalg.norm(v, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = np.where(length > 0, v / length, 0.0)
        X = np.cos(length) * X + np.sin(length) * direction
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return np.full(count, ALIVE, np.int8), X, np.zeros(count)


def _start_point(domain: Domain, x) -> np.ndarray:
    pts, single = as_points(x, domain.dim)
    if not single:
        raise GeometryError("a single starting point is required")
    if isinstance(domain, Sphere2):
        domain.contains(pts)
        return pts
    if not domain.closed and not bool(domain._contains(pts[None])[0]):
        raise GeometryError("starting point lies outside the domain")
    return pts


def simulate(domain: Domain, x, t: float, cfg: PathEnsembleConfig, target=None,
             region: Optional[Callable] = None) -> PathResult:
    """Simulate ``cfg.n_paths`` killed paths from ``x`` up to time ``t``."""
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    if t > cfg.max_time:
        raise ValueError(f"t={t} exceeds max_time={cfg.max_time}")
    x0 = _start_point(domain, x)
    tgt = _as_target(target)
    if isinstance(domain, Sphere2):
        if tgt is not None:
            raise NotImplementedError("targets on the sphere are not supported")
        work = lambda rng, count: _sphere_block(x0, t, cfg, rng, count)  # noqa: E731
    else:
        work = lambda rng, count: _simulate_block(domain, x0, t, cfg, rng, count, tgt, region)  # noqa: E731
    parts = map_blocks(cfg, work)
    status = np.concatenate([p[0] for p in parts])
    position = np.concatenate([p[1] for p in parts])
    occupation = np.concatenate([p[2] for p in parts]) if region is not None else None
    return PathResult(status, position, t, occupation)


def mc_exit_prob(domain: Domain, x, t: float, cfg: PathEnsembleConfig) -> HitEstimate:
    """Fraction of paths whose first boundary crossing happens by time ``t``."""
    if domain.closed:
        raise GeometryError("closed geometries have no boundary to exit through")
    res = simulate(domain, x, t, cfg)
    return HitEstimate.from_counts(int(np.count_nonzero(res.status == KILLED)), res.n_paths, t)


def feynman_kac(domain: Domain, f: Callable, x, t: float, cfg: PathEnsembleConfig) -> Estimate:
    """Estimate e^{t Delta_Omega} f(x) = E_x[f(w(t)) ; path not killed by time t]."""
    res = simulate(domain, x, t, cfg)
    scores = fk_scores(res, f)
    n = scores.size
    mean = float(np.mean(scores))
    se = float(np.std(scores, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se, n, t)


def fk_scores(res: PathResult, f: Callable) -> np.ndarray:
    """Per-path Feynman-Kac scores: f at the endpoint, zero for killed paths."""
    alive = res.status == ALIVE
    scores = np.zeros(res.n_paths)
    if alive.any():
        scores[alive] = np.asarray(f(res.position[alive]), dtype=float).reshape(-1)
    return scores


def killed_hit_prob(domain: Domain, target, x, tau: float, cfg: PathEnsembleConfig) -> HitEstimate:
    """Probability of entering ``target`` before time ``tau`` without touching the boundary."""
    res = simulate(domain, x, tau, cfg, target=target)
    return HitEstimate.from_counts(int(np.count_nonzero(res.status == HIT)), res.n_paths, tau)


def occupation_time(domain: Domain, region: Callable, x, t: float, cfg: PathEnsembleConfig) -> Estimate:
    """E_x int_0^t 1{w(s) in region, not yet killed} ds (right-endpoint rule per step)."""
    res = simulate(domain, x, t, cfg, region=region)
    occ = res.occupation
    n = occ.size
    return Estimate(float(occ.mean()), float(occ.std(ddof=1) / math.sqrt(n)), n, t)


def sphere_walk(x, t: float, cfg: PathEnsembleConfig) -> np.ndarray:
    """Endpoints of geodesic random walks on the unit sphere after time ``t``."""
    return simulate(Sphere2(), x, t, cfg).position
