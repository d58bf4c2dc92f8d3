"""Ball-escape probability Theta_n(r^2/t) by several independent routes.

``Theta_n(r^2/t)`` is the probability that a Brownian particle in R^n leaves
the ball of radius ``r`` about its starting point within time ``t``.  Two time
normalisations are in use:

* ``generatorDelta`` -- transition density (4 pi t)^(-n/2) exp(-|x-y|^2 / 4t),
  the heat kernel of ``Delta``.  This is the canonical convention here.
* ``generatorHalfDelta`` -- standard Brownian motion (generator Delta / 2).

A particle under ``generatorDelta`` at time ``t`` is distributed like a standard
one at time ``2t``.  The Bessel series below is written for standard Brownian
motion, so ``generatorDelta`` queries are evaluated at ``2t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, special

GENERATOR_DELTA = "generatorDelta"
GENERATOR_HALF_DELTA = "generatorHalfDelta"
CONVENTIONS = (GENERATOR_DELTA, GENERATOR_HALF_DELTA)

METHODS = ("bessel_series", "gamma_integral", "cube_bound", "asymptotic_bound", "monte_carlo")
ONE_SIDED = frozenset({"cube_bound", "asymptotic_bound"})

SERIES_SWITCH = 12.0
MAX_TERMS = 200
TERM_TOL = 1e-10
REMAINDER_TOL = 1e-8


class ThetaError(ArithmeticError):
    """Raised when a route cannot deliver its accuracy guarantee."""


class ConvergenceError(ThetaError):
    pass


# ---------------------------------------------------------------------------
# Bessel functions of the first kind


def _bessel_series(nu: float, x: np.ndarray) -> np.ndarray:
    half = x / 2.0
    term = np.power(half, nu) / math.gamma(nu + 1.0)
    total = term.copy()
    q = half * half
    for k in range(1, 200):
        term = -term * q / (k * (k + nu))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _bessel_hankel(nu: float, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    chi = x - (0.5 * nu + 0.25) * math.pi
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = np.ones_like(x)
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 120):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(a)
        # asymptotic series: stop each point at its smallest term
        active &= (mag < last) & (mag > 1e-17)
        if not active.any():
            break
        contrib = np.where(active, a, 0.0)
        # a_k multiplies (-1)^(k//2); odd k feed Q, even k feed P
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q = q + sign * contrib
        else:
            p = p + sign * contrib
        last = np.where(active, mag, last)
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j(nu: float, x):
    """J_nu(x) for real order nu >= -1/2 and x >= 0.

    Ascending series below ``x = 12``, Hankel asymptotic expansion above.
    """
    if nu < -0.5:
        raise ValueError("bessel_j is implemented for nu >= -1/2")
    arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(arr).astype(float)
    if np.any(flat < 0):
        raise ValueError("bessel_j needs x >= 0")
    out = np.empty_like(flat)
    small = flat < SERIES_SWITCH
    if small.any():
        out[small] = _bessel_series(nu, flat[small])
    if (~small).any():
        out[~small] = _bessel_hankel(nu, flat[~small])
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def bessel_j_prime(nu: float, x):
    x = np.asarray(x, dtype=float)
    return nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x)


def _mcmahon(nu: float, k: int) -> float:
    mu = 4.0 * nu * nu
    beta = (k + 0.5 * nu - 0.25) * math.pi
    b8 = 8.0 * beta
    return (beta - (mu - 1) / b8 - 4 * (mu - 1) * (7 * mu - 31) / (3 * b8**3)
            - 32 * (mu - 1) * (83 * mu**2 - 982 * mu + 3779) / (15 * b8**5))


@lru_cache(maxsize=None)
def _zero(nu: float, k: int) -> float:
    x = _mcmahon(nu, k)
    for _ in range(50):
        f = bessel_j(nu, x)
        step = f / bessel_j_prime(nu, x)
        x -= step
        if abs(step) <= 1e-14 * x:
            return float(x)
    raise ConvergenceError(f"Newton iteration for j_({nu},{k}) did not converge")


def bessel_zero(nu: float, k: int) -> float:
    """k-th positive zero of J_nu (McMahon start, Newton refinement)."""
    if nu < -0.5:
        raise ValueError("bessel_zero is implemented for nu >= -1/2")
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    x = _zero(float(nu), int(k))
    if k > 1:
        prev = _zero(float(nu), int(k) - 1)
        if not 2.0 < x - prev < 4.5:
            raise ConvergenceError(f"zero j_({nu},{k}) landed on the wrong branch")
    elif not x > nu:
        raise ConvergenceError(f"zero j_({nu},1) landed on the wrong branch")
    return x


@lru_cache(maxsize=None)
def _series_table(nu: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    zeros = np.array([bessel_zero(nu, k) for k in range(1, count + 1)])
    norm = 2.0 ** (nu - 1.0) * math.gamma(nu + 1.0)
    coef = zeros ** (nu - 1.0) / bessel_j(nu + 1.0, zeros) / norm
    zeros.setflags(write=False)
    coef.setflags(write=False)
    return zeros, coef


# ---------------------------------------------------------------------------
# Queries and results


@dataclass(frozen=True)
class ThetaQuery:
    n: int
    r: float
    t: float
    convention: str = GENERATOR_DELTA

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("dimension n must be an integer >= 1")
        for name in ("r", "t"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")

    @property
    def ratio(self) -> float:
        return self.r**2 / self.t

    @property
    def nu(self) -> float:
        return (self.n - 2) / 2.0

    @property
    def standard_time(self) -> float:
        """The query time expressed for standard Brownian motion."""
        return 2.0 * self.t if self.convention == GENERATOR_DELTA else self.t

    @property
    def heat_time(self) -> float:
        """The query time expressed for the heat kernel of Delta."""
        return self.t if self.convention == GENERATOR_DELTA else 0.5 * self.t


@dataclass
class ThetaResult:
    value: float
    method: str
    error_bound: float
    truncation: int
    query: ThetaQuery
    one_sided: bool = False
    valid: bool = True
    raw_value: Optional[float] = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.one_sided = self.method in ONE_SIDED

    def row(self) -> dict:
        q = self.query
        return {"n": q.n, "r": q.r, "t": q.t, "ratio": q.ratio, "method": self.method,
                "value": self.value, "error_bound": self.error_bound, "convention": q.convention}


# ---------------------------------------------------------------------------
# Routes


def phi_cdf(s):
    """Standard normal cumulative distribution function."""
    s = np.asarray(s, dtype=float)
    out = 0.5 * special.erfc(-s / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _union_tail_bound(q: ThetaQuery) -> float:
    # exiting the ball needs some coordinate to travel r / sqrt(n)
    a = q.r / math.sqrt(q.n)
    return min(1.0, q.n * 4.0 * phi_cdf(-a / math.sqrt(q.standard_time)))


def _tail_remainder(nu, last_zero, coef_scale, s, spacing) -> float:
    m = np.arange(1, 20001)
    j = last_zero + m * spacing
    terms = coef_scale * j ** (nu - 0.5) * np.exp(-0.5 * j * j * s)
    return float(terms.sum())


def theta_bessel(q: ThetaQuery, K: Optional[int] = None) -> ThetaResult:
    """Bessel-zero series for the survival probability, subtracted from one.

    With ``K`` unset, terms are added until the next one falls below 1e-10
    (at most 200 terms).
    """
    if K is not None and K < 1:
        raise ValueError("K must be >= 1")
    s = q.standard_time / q.r**2
    nu = q.nu
    bound = _union_tail_bound(q)
    if bound < 1e-15 and K is None:
        return ThetaResult(0.0, "bessel_series", bound, 0, q,
                           raw_value=None, notes={"branch": "gaussian-tail"})
    cap = MAX_TERMS if K is None else int(K)
    zeros, coef = _series_table(nu, cap)
    terms = coef * np.exp(-0.5 * zeros**2 * s)
    if K is None:
        small = np.nonzero(np.abs(terms) < TERM_TOL)[0]
        used = int(small[0]) + 1 if small.size else cap
    else:
        used = cap
    survival = float(np.sum(terms[:used]))
    # |coef_k| ~ sqrt(pi/2) j^(nu-1/2) / norm; pad the constant for safety
    scale = 1.25 * math.sqrt(math.pi / 2.0) / (2.0 ** (nu - 1.0) * math.gamma(nu + 1.0))
    spacing = 0.95 * math.pi if nu <= 5 else 0.9 * math.pi
    remainder = _tail_remainder(nu, float(zeros[used - 1]), scale, s, spacing)
    if remainder > REMAINDER_TOL and K is None:
        raise ThetaError(f"series remainder {remainder:.2e} exceeds tolerance at K={cap}")
    value = min(1.0, max(0.0, 1.0 - survival))
    raw = None
    if q.convention == GENERATOR_DELTA:
        # the printed series evaluated at the query time as-is
        raw_terms = coef * np.exp(-0.5 * zeros**2 * (q.t / q.r**2))
        raw = float(min(1.0, max(0.0, 1.0 - raw_terms[:used].sum())))
    # 1 - sum cancels badly when Theta is tiny; account for the rounding
    rounding = 4.0 * used * np.finfo(float).eps * float(np.sum(np.abs(terms[:used])))
    return ThetaResult(value, "bessel_series", remainder + rounding + 1e-15, used, q, raw_value=raw)


def theta_gamma(q: ThetaQuery) -> ThetaResult:
    """Time integral of the normalised upper incomplete Gamma function.

    The integrand is the heat-kernel mass outside the ball at time ``s``, so
    the integral is the expected time spent outside the ball up to ``t``.  It
    is a time, not a probability, and exceeds 1 for large ``t``; the value is
    reported unclamped with ``valid`` flagging the excursion.
    """
    a = q.n / 2.0
    t = q.heat_time
    r2 = q.r**2

    def integrand(s):
        if s <= 0:
            return 0.0
        return float(special.gammaincc(a, r2 / (4.0 * s)))

    if t <= 0:
        return ThetaResult(0.0, "gamma_integral", 0.0, 0, q)
    # the integrand switches on around s ~ r^2 / (4 a); give quad the hint
    knee = r2 / (4.0 * max(a, 0.5))
    points = [p for p in (0.05 * knee, 0.25 * knee, knee, 4 * knee) if 0 < p < t]
    value, err, info = integrate.quad(integrand, 0.0, t, points=points or None,
                                      epsabs=1e-13, epsrel=1e-11, limit=400, full_output=True)[:3]
    if err > 1e-8 * max(1.0, abs(value)):
        raise ConvergenceError(f"gamma quadrature error {err:.2e}")
    return ThetaResult(float(value), "gamma_integral", float(err), int(info["neval"]), q,
                       valid=bool(0.0 <= value <= 1.0))


def gamma_integrand(q: ThetaQuery, s: float) -> float:
    """Normalised Gamma(n/2, r^2/4s) / Gamma(n/2) at heat-kernel time ``s``."""
    return float(special.gammaincc(q.n / 2.0, q.r**2 / (4.0 * s)))


def theta_cube_bound(q: ThetaQuery) -> ThetaResult:
    """(4 Phi(-r / sqrt(n t)))^n for the inscribed hypercube, clamped to [0, 1]."""
    x = q.r / math.sqrt(q.n * q.standard_time)
    value = min(1.0, max(0.0, (4.0 * phi_cdf(-x)) ** q.n))
    return ThetaResult(value, "cube_bound", 0.0, 0, q)


def cube_regime_bound(q: ThetaQuery) -> float:
    """Closed-form majorant 2^(3n/2) / pi^(n/2) exp(-r^2 / 2t), valid for r^2/t >= n."""
    n = q.n
    return 2.0 ** (1.5 * n) / math.pi ** (n / 2.0) * math.exp(-q.r**2 / (2.0 * q.standard_time))


def _asymptotic_value(n: int, eps: float, c: float, t: float) -> float:
    return (1.0 + eps) / math.gamma(n / 2.0) * c ** (n / 2.0 - 1.0) * t * math.exp(-c / 4.0)


_THRESHOLD_GRID = np.geomspace(1.0, 2000.0, 240)


@lru_cache(maxsize=None)
def asymptotic_threshold(n: int, eps: float, t: float) -> float:
    """Smallest ratio c on a log grid past which the crude bound dominates the series.

    Calibrated at fixed heat-kernel time ``t``: the bound is linear in ``t``
    while Theta depends on ``r^2/t`` only, so validity is time dependent.
    Raises ThetaError when no such ratio exists below the underflow range.
    """
    ok = []
    for c in _THRESHOLD_GRID:
        q = ThetaQuery(n, math.sqrt(c * t), t)
        exact = theta_bessel(q).value
        if exact < 1e-250:
            break
        ok.append(_asymptotic_value(n, eps, c, t) >= exact)
    if not ok or not ok[-1]:
        raise ThetaError(f"no validity regime for the asymptotic bound at n={n}, eps={eps}, t={t}")
    idx = len(ok) - 1
    while idx > 0 and ok[idx - 1]:
        idx -= 1
    return float(_THRESHOLD_GRID[idx])


def theta_asymptotic_bound(q: ThetaQuery, eps: float = 0.1, check: bool = True) -> ThetaResult:
    """((1+eps)/Gamma(n/2)) c^(n/2-1) t e^(-c/4) with c = r^2/t (heat-kernel time)."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    t = q.heat_time
    c = q.r**2 / t
    threshold = None
    if check:
        threshold = asymptotic_threshold(q.n, float(eps), float(t))
        if c < threshold:
            raise ThetaError(f"r^2/t={c:.4g} is below the calibrated threshold {threshold:.4g}")
    value = _asymptotic_value(q.n, eps, c, t)
    res = ThetaResult(min(value, 1.0), "asymptotic_bound", 0.0, 0, q, raw_value=value)
    res.notes["threshold"] = threshold
    return res


def theta_monte_carlo(q: ThetaQuery, cfg=None) -> ThetaResult:
    """Exit fraction of simulated paths from the ball about the start."""
    from . import geometry, stochastic

    if cfg is None:
        cfg = stochastic.PathEnsembleConfig(n_paths=100_000, dt=q.r**2 / 1000.0, max_time=q.heat_time)
    domain = geometry.Interval(-q.r, q.r) if q.n == 1 else geometry.Disk(q.r, q.n)
    est = stochastic.mc_exit_prob(domain, np.zeros(q.n), q.heat_time, cfg)
    return ThetaResult(est.p_hat, "monte_carlo", est.std_err, est.n_paths, q)


def theta(q: ThetaQuery, method: str = "bessel_series", **kwargs) -> ThetaResult:
    routes = {
        "bessel_series": theta_bessel,
        "gamma_integral": theta_gamma,
        "cube_bound": theta_cube_bound,
        "asymptotic_bound": theta_asymptotic_bound,
        "monte_carlo": theta_monte_carlo,
    }
    if method not in routes:
        raise ValueError(f"unknown method {method!r}")
    return routes[method](q, **kwargs)


def Theta(n: int, ratio: float, convention: str = GENERATOR_DELTA) -> float:
    """Convenience: the series value as a function of r^2/t alone (r = 1)."""
    return theta_bessel(ThetaQuery(n, 1.0, 1.0 / ratio, convention)).value


def comparison_table(ns=(1, 2, 3), ratios=(1.0, 2.0, 4.0, 9.0), r: float = 1.0,
                     convention: str = GENERATOR_DELTA, mc_cfg=None, eps: float = 0.1) -> list[dict]:
    """Rows comparing every route on a grid of (n, r^2/t)."""
    rows = []
    for n in ns:
        for ratio in ratios:
            q = ThetaQuery(n, r, r**2 / ratio, convention)
            results = [theta_bessel(q), theta_gamma(q), theta_cube_bound(q)]
            try:
                results.append(theta_asymptotic_bound(q, eps))
            except ThetaError:
                results.append(theta_asymptotic_bound(q, eps, check=False))
                results[-1].valid = False
            if mc_cfg is not None:
                results.append(theta_monte_carlo(q, mc_cfg))
            for res in results:
                row = res.row()
                row["valid"] = res.valid
                row["one_sided"] = res.one_sided
                rows.append(row)
    return rows
