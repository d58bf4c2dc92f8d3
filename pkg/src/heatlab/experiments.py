"""Named verifications that combine the geometry, theta, eigenmodel,
stochastic and heatgrid modules into pass/fail reports.

Every driver returns an ``ExperimentReport``.  Each row compares a left-hand
side with a right-hand side under a stated relation and tolerance; Monte
Carlo rows carry a standard error and use a 3 sigma margin.  Rows outside a
theorem's hypotheses are labelled ``out-of-hypothesis`` and never count as
failures; ``info`` rows record supplementary numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special
from scipy.optimize import brentq

from . import eigenmodel as em
from . import heatgrid as hg
from .geometry import Circle, Disk, Domain, Dumbbell, Sphere2, Torus2
from .stochastic import (DEFAULT_SEED, HIT, KILLED, ALIVE, PathEnsembleConfig, Target, killed_hit_prob,
                         mc_exit_prob, occupation_time, simulate)
from .theta import Theta, ThetaQuery, bessel_j, bessel_zero, phi_cdf, theta_bessel

PASS, FAIL, OOH, INFO = "pass", "fail", "out-of-hypothesis", "info"
VERDICTS = (PASS, FAIL, OOH, INFO)
N_SIGMA = 3.0


class RegimeError(ValueError):
    """Parameters outside the regime where a driver's inequality is claimed."""


@dataclass
class Row:
    quantity: str
    lhs: float
    rhs: float
    relation: str
    tolerance: float
    verdict: str
    std_err: Optional[float] = None
    provenance: str = ""
    notes: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


def compare(lhs: float, rhs: float, relation: str, tolerance: float = 0.0) -> bool:
    """Check ``lhs relation rhs`` with slack ``tolerance`` in the claim's favour."""
    if relation == "<=":
        return lhs <= rhs + tolerance
    if relation == ">=":
        return lhs >= rhs - tolerance
    if relation == "==":
        return abs(lhs - rhs) <= tolerance
    raise ValueError(f"unknown relation {relation!r}")


def _clean(x):
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


@dataclass
class ExperimentReport:
    name: str
    inputs: dict
    seed: int = DEFAULT_SEED
    rows: list = field(default_factory=list)
    header: str = ""

    def add(self, quantity, lhs, rhs, relation="<=", tolerance=0.0, verdict=None, std_err=None,
            provenance="", notes="") -> Row:
        lhs, rhs = float(lhs), float(rhs)
        if verdict is None:
            verdict = PASS if compare(lhs, rhs, relation, tolerance) else FAIL
        row = Row(quantity, lhs, rhs, relation, float(tolerance), verdict,
                  None if std_err is None else float(std_err), provenance, notes)
        self.rows.append(row)
        return row

    def check(self, quantity, ok: bool, value: float = float("nan"), notes="", provenance="") -> Row:
        """Boolean row for structural checks (monotonicity, convergence)."""
        return self.add(quantity, 1.0 if ok else 0.0, 1.0, "==", 0.0, PASS if ok else FAIL,
                        provenance=provenance, notes=notes if math.isnan(value) else f"{notes} value={value:.6g}".strip())

    @property
    def verdicts(self) -> list[str]:
        return [r.verdict for r in self.rows]

    @property
    def passed(self) -> bool:
        return all(v != FAIL for v in self.verdicts)

    def failures(self) -> list[Row]:
        return [r for r in self.rows if r.verdict == FAIL]

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "header": self.header,
            "inputs": self.inputs,
            "seed": self.seed,
            "rows": [asdict(r) for r in self.rows],
            "verdicts": self.verdicts,
            "passed": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    CSV_COLUMNS = ("experiment", "seed", "quantity", "lhs", "relation", "rhs", "tolerance",
                   "std_err", "verdict", "provenance", "notes")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([self.name, self.seed, r.quantity, repr(r.lhs), r.relation, repr(r.rhs),
                        repr(r.tolerance), "" if r.std_err is None else repr(r.std_err),
                        r.verdict, r.provenance, r.notes])
        return buf.getvalue()

    def file_stem(self) -> str:
        return f"{self.name}_seed{self.seed}"

    def write(self, directory, fmt: str = "both") -> list[str]:
        os.makedirs(directory, exist_ok=True)
        paths = []
        if fmt in ("json", "both"):
            paths.append(atomic_write(os.path.join(directory, self.file_stem() + ".json"), self.to_json()))
        if fmt in ("csv", "both"):
            paths.append(atomic_write(os.path.join(directory, self.file_stem() + ".csv"), self.to_csv()))
        return paths

    def summary_lines(self) -> list[str]:
        return [f"[{r.verdict}] {r.quantity}: {r.lhs:.6g} {r.relation} {r.rhs:.6g}" for r in self.rows]


def atomic_write(path: str, text: str) -> str:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def manifold_dim(domain: Domain) -> int:
    return 2 if isinstance(domain, Sphere2) else domain.dim


def _fit_line(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


# -- concentration ---------------------------------------------------------

CLOSED = (Circle, Torus2, Sphere2)


def _closed_mode(mode) -> None:
    if not isinstance(mode.domain, CLOSED):
        raise RegimeError("the concentration theorems are stated on closed manifolds")


def concentration_lower_rows(report: ExperimentReport, mode, r0: float, t0: float, c1: float = 1.0):
    _closed_mode(mode)
    if not 0 < t0 <= r0**2:
        raise RegimeError(f"t0 <= r0^2 required (small-time regime 0 < t <= r^2); got t0={t0}, r0={r0}")
    lam = mode.eigenvalue
    r = r0 / math.sqrt(lam)
    n = manifold_dim(mode.domain)
    th = Theta(n, r0**2 / t0)
    norm = mode.lp_mass(1.0)
    tube = mode.tube_mass(r, 1.0)
    rhs = (1.0 - math.exp(-t0) - c1 * th) * norm
    tag = f"{mode.label} r0={r0:g} t0={t0:g}"
    vacuous = " (vacuous: rhs <= 0)" if rhs <= 0 else ""
    report.add(f"L1 tube mass lower bound {tag}", tube, rhs, ">=", 1e-9 * norm,
               provenance="tube_mass quadrature; theta bessel series",
               notes=f"fraction={tube / norm:.9g}; Theta_{n}={th:.6g}{vacuous}")
    if th <= (1.0 - math.exp(-t0)) / (2 * c1) and t0 <= 1.0:
        report.add(f"L1 tube corollary {tag}", tube, t0 / 4 * norm, ">=", 1e-9 * norm,
                   provenance="derived from the lower bound", notes="bound (t0/4)||phi||_1")
    else:
        report.add(f"L1 tube corollary {tag}", tube, t0 / 4 * norm, ">=", 0.0, OOH,
                   notes="Theta condition for the corollary not met")


def run_concentration_lower(mode, r0: float, t0: float, c1: float = 1.0, seed: int = DEFAULT_SEED,
                            report: Optional[ExperimentReport] = None) -> ExperimentReport:
    report = report or ExperimentReport("concentration_lower", {"mode": mode.label, "r0": r0, "t0": t0, "C1": c1}, seed)
    concentration_lower_rows(report, mode, r0, t0, c1)
    return report


def concentration_lower_sweep(modes, r0s, t0s, c1: float = 1.0, c1_tolerance: float = 0.05,
                              seed: int = DEFAULT_SEED) -> ExperimentReport:
    report = ExperimentReport("concentration_lower",
                              {"modes": [m.label for m in modes], "r0": list(r0s), "t0": list(t0s), "C1": c1},
                              seed, header="r = r0 lambda^-1/2, t = t0 lambda^-1; C1 = 1 on flat and round models")
    # C1 is a comparison constant for small-time Gaussian bounds; it tends to 1 on
    # flat/round models, so a configured value far from 1 is flagged
    report.add("C1 agrees with the flat-space value", c1, 1.0, "==", c1_tolerance,
               provenance="configuration", notes="override for forced-failure fixtures")
    for mode in modes:
        for r0 in r0s:
            for t0 in t0s:
                if t0 > r0**2:
                    report.add(f"L1 tube mass lower bound {mode.label} r0={r0:g} t0={t0:g}", 0, 0, "<=", 0, OOH,
                               notes="t0 > r0^2")
                    continue
                concentration_lower_rows(report, mode, r0, t0, c1)
    return report


def concentration_upper_ratio(mode, r0: float, t0: float, p: float) -> float:
    lam = mode.eigenvalue
    r = r0 / math.sqrt(lam)
    tube = mode.tube_mass(r, p) ** (1 / p)
    return tube / ((1 - math.exp(-p * t0)) ** (1 / p) * mode.lp_norm(p))


def run_concentration_upper(modes, r0: float, t0: float, p: float, max_spread: float = 2.0,
                            seed: int = DEFAULT_SEED) -> ExperimentReport:
    """Empirical C3 = sup ratio; verdict: the ratio stays bounded across the sweep."""
    if p not in (1, 2, 4):
        raise RegimeError("p must be 1, 2 or 4")
    report = ExperimentReport("concentration_upper",
                              {"modes": [m.label for m in modes], "r0": r0, "t0": t0, "p": p}, seed,
                              header="ratio = ||phi||_Lp(T_r) / ((1 - e^{-p t0})^{1/p} ||phi||_p)")
    ratios, labels = [], []
    for mode in modes:
        _closed_mode(mode)
        ratio = concentration_upper_ratio(mode, r0, t0, p)
        in_hyp = manifold_dim(mode.domain) == 2
        ratios.append(ratio) if in_hyp else None
        labels.append((mode, ratio, in_hyp))
    base = min(ratios) if ratios else float("nan")
    for mode, ratio, in_hyp in labels:
        if in_hyp:
            report.add(f"C3 ratio {mode.label} p={p:g}", ratio, max_spread * base, "<=", 1e-12,
                       provenance="tube_mass quadrature")
        else:
            report.add(f"C3 ratio {mode.label} p={p:g}", ratio, float("nan"), "<=", 0, OOH,
                       notes="one-dimensional analogue, outside the two-dimensional theorem")
    if ratios:
        report.add("empirical C3 (sup of ratio)", max(ratios), max(ratios), "==", 0, INFO)
        report.add("ratio spread max/min", max(ratios) / base, max_spread, "<=", 0.0)
    return report


# -- Sogge-Zelditch --------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    name: str
    value: Callable
    laplacian: Callable


TEST_FUNCTIONS = {
    "one": TestFunction("one", lambda x: np.ones(x.shape[0]), lambda x: np.zeros(x.shape[0])),
    "cos": TestFunction("cos", lambda x: np.cos(x[:, 0]), lambda x: -np.cos(x[:, 0])),
    "cos_y": TestFunction("cos_y", lambda x: np.cos(x[:, 1]), lambda x: -np.cos(x[:, 1])),
}


def _cells(factor: em.SineFactor) -> list[tuple[float, float]]:
    return [(factor.a + i * factor.s, factor.a + (i + 1) * factor.s) for i in range(factor.halves)]


def sogge_zelditch_sides(mode, f: TestFunction, order: int = 48) -> tuple[float, float]:
    """int ((Delta + lam) f)|phi|  and  2 int_N f |grad phi| for separable modes."""
    if not isinstance(mode, em._Separable) or not isinstance(mode.domain, (Circle, Torus2)):
        raise RegimeError("needs a separable mode on a closed 1D/2D flat geometry")
    lam = mode.eigenvalue
    factors = mode.factors()
    xg, wg = em._gl_nodes(order)
    axis_nodes = []
    for fac in factors:
        nodes, weights, signs = [], [], []
        for i, (a, b) in enumerate(_cells(fac)):
            nodes.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
            weights.append(0.5 * (b - a) * wg)
            signs.append(np.full(order, 1.0 if i % 2 == 0 else -1.0))
        axis_nodes.append((np.concatenate(nodes), np.concatenate(weights), np.concatenate(signs)))
    grids = np.meshgrid(*[a[0] for a in axis_nodes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    W = axis_nodes[0][1]
    for a in axis_nodes[1:]:
        W = np.multiply.outer(W, a[1])
    phi_abs = np.abs(mode._eval(pts))
    lhs = float(np.dot(W.reshape(-1), (f.laplacian(pts) + lam * f.value(pts)) * phi_abs))
    rhs = 0.0
    for ax, fac in enumerate(factors):
        zeros = fac.a + np.arange(fac.halves) * fac.s
        slope = abs(fac.derivative(np.array([fac.a]))[0])
        others = [a for j, a in enumerate(axis_nodes) if j != ax]
        for z in zeros:
            if not others:
                rhs += 2.0 * float(f.value(np.array([[z]]))[0]) * slope
                continue
            o_nodes, o_w, _ = others[0]
            line = np.zeros((o_nodes.size, 2))
            line[:, ax] = z
            line[:, 1 - ax] = o_nodes
            other_fac = factors[1 - ax]
            grad = slope * np.abs(other_fac.value(o_nodes))
            rhs += 2.0 * float(np.dot(o_w, f.value(line) * grad))
    return lhs, rhs


def verify_sogge_zelditch(mode, f="one", tol: float = 1e-6, seed: int = DEFAULT_SEED,
                          report: Optional[ExperimentReport] = None) -> ExperimentReport:
    fn = TEST_FUNCTIONS[f] if isinstance(f, str) else f
    report = report or ExperimentReport("sogge_zelditch", {"mode": mode.label, "f": fn.name}, seed)
    lhs, rhs = sogge_zelditch_sides(mode, fn)
    scale = max(abs(lhs), abs(rhs), 1.0)
    report.add(f"int (Delta+lam)f|phi| vs 2 int_N f|grad phi| ({mode.label}, f={fn.name})", lhs, rhs, "==",
               tol * scale, provenance="cellwise Gauss-Legendre; nodal-set sum/line quadrature",
               notes="tolerance relative to max(|lhs|, |rhs|, 1)")
    return report


# -- Gaussian beams --------------------------------------------------------

def run_gaussian_beam(ls: Sequence[int], p: float = 2.0, slope_tol: float = 0.05, norm_tol: float = 0.02,
                      seed: int = DEFAULT_SEED) -> ExperimentReport:
    report = ExperimentReport("gaussian_beam", {"l": list(ls), "p": p}, seed,
                              header="Re(x1+ix2)^l on S^2; tube T_{1/l}")
    ls = [int(l) for l in ls]
    modes = [em.SphereGaussianBeam(l) for l in ls]
    tubes = [m.tube_mass(1.0 / m.l, p) for m in modes]
    fulls = [m.lp_mass(p) for m in modes]
    logl = np.log(ls)
    s_tube, _, _ = _fit_line(logl, np.log(tubes))
    s_full, _, _ = _fit_line(logl, np.log(fulls))
    for m, tb, fu in zip(modes, tubes, fulls):
        report.add(f"tube mass |phi|^p over T_(1/l), l={m.l}", tb, fu, "<=", 1e-12 * fu, provenance="quadrature")
    report.add("log-log slope of tube mass", s_tube, -0.5, "==", slope_tol, provenance="least squares")
    report.add("log-log slope of full mass", s_full, -0.5, "==", slope_tol, provenance="least squares")
    gam = [math.exp(special.gammaln(l * p / 2 + 1) - special.gammaln(l * p / 2 + 1.5)) for l in ls]
    ratios = np.array(fulls) / np.array(gam)
    const = float(np.mean(ratios))
    dev = float(np.max(np.abs(ratios / const - 1)))
    report.add("full mass vs Gamma(lp/2+1)/Gamma(lp/2+3/2), max relative deviation", dev, norm_tol, "<=", 0.0,
               provenance="one fitted constant", notes=f"constant={const:.12g}")
    sat = modes[0].tube_mass(math.pi / 2, p) / fulls[0]
    report.add("saturated tube (width pi/2) / full mass", sat, 1.0, "==", 1e-9)
    return report


# -- avoided crossings -----------------------------------------------------

@dataclass(frozen=True)
class StripInBall(Domain):
    """Thin strip {|y| < w/2} intersected with the disk of radius R."""

    width: float = 0.01
    radius: float = 0.04
    dim: int = 2

    def _contains(self, x):
        return (np.abs(x[..., 1]) < self.width / 2) & (np.sum(x * x, axis=-1) < self.radius**2)

    def _distance(self, x):
        a = np.abs(self.width / 2 - np.abs(x[..., 1]))
        b = np.abs(self.radius - np.sqrt(np.sum(x * x, axis=-1)))
        return np.minimum(a, b)

    def strip_distance(self, x):
        return self.width / 2 - np.abs(x[..., 1])

    def ball_distance(self, x):
        return self.radius - np.sqrt(np.sum(x * x, axis=-1))

    def volume(self):
        return float("nan")

    def bounding_box(self):
        return np.array([-self.radius, -self.width / 2]), np.array([self.radius, self.width / 2])


def strip_probabilities(width: float, cubes: int, t0: float, start: int, cfg: PathEnsembleConfig,
                        steps: int = 100) -> dict:
    """p_ib (strip wall), p_ie (ball boundary), p_ij (alive in cube j at time t)."""
    R = cubes * width / 2
    dom = StripInBall(width, R)
    t = t0 * width**2
    centers = -R + (np.arange(cubes) + 0.5) * width
    c = cfg.with_(dt=t / steps, max_time=max(cfg.max_time, t))
    res = simulate(dom, [centers[start], 0.0], t, c)
    n = res.n_paths
    killed = res.status == KILLED
    pos = res.position
    wall = killed & (dom.strip_distance(pos) <= dom.ball_distance(pos))
    alive = res.status == ALIVE
    cube = np.clip(np.floor((pos[alive, 0] + R) / width).astype(int), 0, cubes - 1)
    counts = np.bincount(cube, minlength=cubes)
    return {
        "n": n, "t": t, "centers": centers,
        "p_ib": np.count_nonzero(wall) / n,
        "p_ie": np.count_nonzero(killed & ~wall) / n,
        "p_ij": counts / n,
        "counts": counts,
    }


def _rect_sweep_default():
    return [(1, 1), (3, 3), (5, 2), (8, 3), (12, 2), (20, 2), (30, 3), (40, 4), (60, 5)]


def run_avoided_crossing(widths=(0.02, 0.01, 0.005), cubes: int = 8, t0: float = 0.2,
                         cfg: Optional[PathEnsembleConfig] = None, scan_paths: int = 20000,
                         min_count: int = 10, mode_sweep=None, seed: int = DEFAULT_SEED) -> ExperimentReport:
    cfg = cfg or PathEnsembleConfig(n_paths=200_000, seed=seed)
    report = ExperimentReport(
        "avoided_crossing",
        {"widths": list(widths), "cubes": cubes, "t0": t0, "n_paths": cfg.n_paths},
        cfg.seed,
        header=("Thin nodal domains with exponent alpha > 1/2 have no closed-form eigenfunction examples; "
                "this driver checks the probabilistic ingredients on synthetic strips and the diameter "
                "bound's consistency on separable modes."))
    mid = cubes // 2 - 1
    slopes = []
    for w in widths:
        est = strip_probabilities(w, cubes, t0, mid, cfg)
        n = est["n"]
        total = est["p_ib"] + est["p_ie"] + est["p_ij"].sum()
        sigma = math.sqrt(sum(q * (1 - q) for q in [est["p_ib"], est["p_ie"], *est["p_ij"]]) / n)
        report.add(f"event sum p_ib + sum p_ij + p_ie, w={w:g}, start cube {mid}", total, 1.0, "==",
                   N_SIGMA * sigma, std_err=sigma, provenance="killed Monte Carlo")
        dist = np.abs(est["centers"] - est["centers"][mid])
        ok = est["counts"] >= min_count
        x = dist[ok] ** 2 / est["t"]
        y = np.log(est["p_ij"][ok])
        if ok.sum() >= 3:
            slope, _, r2 = _fit_line(x, y)
        else:
            slope, r2 = float("nan"), float("nan")
        slopes.append(slope)
        report.add(f"Gaussian decay slope of log p_ij vs dist^2/t, w={w:g}", slope, 0.0, "<=", 0.0,
                   provenance="least squares over cubes with enough hits", notes=f"points={int(ok.sum())}")
        report.add(f"R^2 of the Gaussian decay fit, w={w:g}", r2, 0.9, ">=", 0.0)
        scan = cfg.with_(n_paths=scan_paths)
        for j in range(cubes):
            e = strip_probabilities(w, cubes, t0, j, scan)
            se = math.sqrt(e["p_ib"] * (1 - e["p_ib"]) / e["n"])
            tot = e["p_ib"] + e["p_ie"] + e["p_ij"].sum()
            sig = math.sqrt(sum(q * (1 - q) for q in [e["p_ib"], e["p_ie"], *e["p_ij"]]) / e["n"])
            report.add(f"event sum, w={w:g}, start cube {j}", tot, 1.0, "==", N_SIGMA * sig, std_err=sig)
            report.add(f"wall hitting p_ib >= 0.1, w={w:g}, start cube {j}", e["p_ib"], 0.1, ">=", 0.0, std_err=se,
                       provenance="killed Monte Carlo")
    finite = [s for s in slopes if math.isfinite(s)]
    if len(finite) >= 2:
        spread = (max(finite) - min(finite)) / abs(np.mean(finite))
        report.add("relative spread of decay slopes across widths", spread, 0.25, "<=", 0.0)
    diameter_rows(report, mode_sweep or _rect_sweep_default())
    return report


def diameter_rows(report: ExperimentReport, sweep) -> None:
    """diam <= C lam^{1/2-alpha} log lam for separable nodal rectangles, C fitted
    on the smallest eigenvalue of the sweep and frozen."""
    modes = sorted((em.RectangleMode(m, n) for m, n in sweep), key=lambda md: (md.eigenvalue, md.m))
    C = None
    for md in modes:
        sides = md.nodal_cells()
        lam = md.eigenvalue
        alpha = -math.log(float(sides.min())) / math.log(lam)
        diam = float(np.hypot(*sides))
        scale = lam ** (0.5 - alpha) * math.log(lam)
        if C is None:
            C = diam / scale
            report.add("fitted diameter constant C", C, C, "==", 0.0, INFO, notes=f"calibrated on {md.label}")
            continue
        report.add(f"nodal rectangle diameter {md.label}", diam, C * scale, "<=", 1e-12 * diam,
                   provenance="closed-form nodal geometry",
                   notes=f"alpha={alpha:.4f} (<= 1/2: consistency check only)")


# -- narrow branches -------------------------------------------------------

def channel_ratio(domain: Dumbbell, fld, samples: int = 401) -> float:
    """max |phi| along the channel centreline over max |phi|, at fixed sample points."""
    L, ln = domain.lobe_size, domain.channel_length
    xs = np.linspace(L, L + ln, samples)
    prof = np.array([abs(fld.at([x, L / 2])) for x in xs])
    return float(prof.max() / np.max(np.abs(fld.values[fld.mask])))


def run_narrow_branch(domain: Optional[Dumbbell] = None, lam0_factors=(10.0, 100.0), h: float = 0.01,
                      cfg: Optional[PathEnsembleConfig] = None, steps: int = 100,
                      seed: int = DEFAULT_SEED) -> ExperimentReport:
    domain = domain or Dumbbell(1.0, 0.05, 1.0)
    cfg = cfg or PathEnsembleConfig(n_paths=1_000_000, seed=seed)
    report = ExperimentReport("narrow_branch",
                              {"domain": repr(domain), "lam0_factors": list(lam0_factors), "h": h,
                               "n_paths": cfg.n_paths}, cfg.seed,
                              header="phi(x) <= e^{lam/lam0} (1 - psi(1/lam0, x)) ||phi||_inf at the channel midpoint")
    lam_c, f_c = hg.dirichlet_eigenpair(domain, 1, h)
    lam_f, f_f = hg.dirichlet_eigenpair(domain, 1, h / 2)
    report.add("ground state eigenvalue, relative change h -> h/2", abs(lam_f - lam_c) / lam_f, 0.01, "<=", 0.0,
               provenance="block inverse iteration", notes=f"lam_h={lam_c:.8g} lam_h/2={lam_f:.8g}")
    ratios = []
    for hh, fld in ((h, f_c), (h / 2, f_f)):
        ratios.append(channel_ratio(domain, fld))
        report.add(f"channel max / overall max, h={hh:g}", ratios[-1], 0.2, "<=", 0.0,
                   provenance="grid eigenfunction sampled on the channel centreline")
    # the ratio is already in units of the overall max; the junction corners limit
    # grid convergence, so agreement is judged on that absolute scale
    report.add("channel ratio agreement across resolutions", abs(ratios[0] - ratios[1]), 0.01, "<=", 0.0,
               provenance="grid eigenfunction", notes=f"relative change={abs(ratios[0] / ratios[1] - 1):.4g}")
    x = domain.channel_midpoint
    lam = lam_f
    phi_x = f_f.at(x)
    mu = 4.0 / domain.channel_width**2          # inradius w/2 at the midpoint
    for factor in lam0_factors:
        lam0 = factor * lam
        t = 1.0 / lam0
        pref = math.exp(lam / lam0)
        c = cfg.with_(dt=t / steps, max_time=max(cfg.max_time, t))
        est = mc_exit_prob(domain, x, t, c)
        # never let the standard error collapse to zero when every path exits
        q = (est.n_paths - est.hits + 0.5) / (est.n_paths + 1.0)
        se = pref * math.sqrt(q * (1 - q) / est.n_paths)
        rhs = pref * (1 - est.p_hat)
        report.add(f"narrow-branch bound, lam0={factor:g} lam (Monte Carlo psi)", phi_x, rhs - N_SIGMA * se, "<=", 0.0,
                   std_err=se, provenance="grid eigenfunction; mc_exit_prob",
                   notes=f"psi_hat={est.p_hat:.9g} survivors={est.n_paths - est.hits}")
        surv_grid = 1.0 - hg.solve_heat_content(domain, t, h / 2).at(x)
        report.add(f"narrow-branch bound, lam0={factor:g} lam (grid psi)", phi_x, pref * surv_grid, "<=", 0.0, INFO,
                   provenance="heat content on the grid",
                   notes=f"survival={surv_grid:.6g}; supplementary deterministic estimate")
        horn = pref * (1 - theta_bessel(ThetaQuery(1, 1 / math.sqrt(mu), t)).value)
        report.add(f"horn variant e^(lam/lam0)(1 - Theta_(n-1)(lam0/mu)), lam0={factor:g} lam", phi_x, horn, "<=", 0.0,
                   provenance="theta bessel series; c = 1", notes=f"mu={mu:g}")
        cube = (4 * phi_cdf(-2.0 / (2 * math.sqrt(mu / lam0)))) ** domain.dim
        report.add(f"cube variant (4 Phi(-r/(2 sqrt(mu/lam0))))^n, lam0={factor:g} lam", cube, 1.0, "<=", 0.0, INFO,
                   notes="r = 2 (cube side equal to the channel width); value recorded only")
    return report


# -- level sets ------------------------------------------------------------

def disk_level_radius(level: float) -> float:
    """Radius where the max-normalized disk ground state J0(j rho) equals ``level``."""
    if not 0 < level < 1:
        raise RegimeError("level must lie strictly between 0 and 1")
    j = bessel_zero(0, 1)
    return brentq(lambda r: float(bessel_j(0, j * r)) - level, 0.0, 1.0, xtol=1e-14)


def run_levelset(cases=((0.5, 0.9, 1.0), (0.3, 0.8, 0.5), (0.7, 0.95, 2.0)),
                 cfg: Optional[PathEnsembleConfig] = None, dt: float = 1e-4,
                 seed: int = DEFAULT_SEED) -> ExperimentReport:
    cfg = cfg or PathEnsembleConfig(n_paths=100_000, seed=seed)
    report = ExperimentReport("levelset", {"cases": [list(c) for c in cases], "n_paths": cfg.n_paths, "dt": dt},
                              cfg.seed, header="unit disk ground state J0(j01 rho), max-normalized")
    lam = bessel_zero(0, 1) ** 2
    disk = Disk(1.0)
    for mu, eta, tau in cases:
        if not 0 < mu <= eta <= 1:
            raise RegimeError("need 0 < mu <= eta <= 1")
        r_mu = disk_level_radius(mu)
        r_eta = disk_level_radius(eta) if eta < 1 else 0.0
        bound = (mu / eta) * (1 - math.exp(-lam * tau)) / lam
        c = cfg.with_(dt=dt, max_time=max(cfg.max_time, tau))
        est = killed_hit_prob(disk, Target.ball([0.0, 0.0], r_eta), [r_mu, 0.0], tau, c)
        tag = f"mu={mu:g} eta={eta:g} tau={tau:g}"
        report.add(f"killed hitting probability of {{phi >= eta}}, {tag}", est.p_hat, bound + N_SIGMA * est.std_err,
                   "<=", 0.0, std_err=est.std_err, provenance="killed_hit_prob",
                   notes=f"bound={bound:.6g}")
        occ = occupation_time(disk, lambda y, r=r_eta: np.sum(y * y, axis=-1) < r * r, [r_mu, 0.0], tau, c)
        report.add(f"killed occupation time of {{phi > eta}}, {tag}", occ.mean, bound + N_SIGMA * occ.std_err,
                   "<=", 0.0, std_err=occ.std_err, provenance="occupation_time",
                   notes="quantity controlled by the Feynman-Kac integration step")
    return report


# -- sublevel sets and tubes -----------------------------------------------

def sublevel_tube_measure(mode, delta: float, eta: float, resolution: int = 4000) -> float:
    """|T_delta cap S_eta| for a max-normalized separable mode by midpoint counting on one nodal cell."""
    if not isinstance(mode, em._Separable):
        raise RegimeError("sublevel measurement needs a separable mode")
    sides = mode.nodal_cells()
    facs = mode.factors()
    axes = [(np.arange(resolution) + 0.5) / resolution * s for s in sides]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.ones_like(mesh[0])
    dist = np.full_like(mesh[0], np.inf)
    for g, fac in zip(mesh, facs):
        local = em.SineFactor(0.0, fac.s, 1)
        vals = vals * np.abs(local.value(g))
        dist = np.minimum(dist, local.distance(g))
    frac = np.mean((dist <= delta) & (vals <= eta))
    n_cells = int(np.prod([fac.halves for fac in facs]))
    return float(frac * np.prod(sides) * n_cells)


def run_sublevel_tube(modes, delta0: float = 1.0, t0: float = 0.02, eps: float = 0.5, band: float = 0.2,
                      seed: int = DEFAULT_SEED) -> ExperimentReport:
    report = ExperimentReport("sublevel_tube",
                              {"modes": [m.label for m in modes], "delta0": delta0, "t0": t0, "eps": eps}, seed,
                              header="|T_delta cap S_eta| + eps >= c ||phi||_1, c fitted on the first mode")
    c0 = None
    for mode in modes:
        vol = mode.domain.volume()
        eta = (1 - eps / (3 * vol)) * math.exp(t0)
        if eta > 1:
            raise RegimeError(f"eta recipe infeasible: (1 - eps/(3|M|)) e^t0 = {eta:.6g} > 1; lower t0 or raise eps")
        lam = mode.eigenvalue
        delta = delta0 / math.sqrt(lam)
        meas = sublevel_tube_measure(mode, delta, eta)
        norm = mode.lp_mass(1.0)
        c = (meas + eps) / norm
        if c0 is None:
            c0 = c
            report.add("fitted constant c", c0, c0, "==", 0.0, INFO, notes=f"calibrated on {mode.label}; eta={eta:.6g}")
        report.add(f"|T cap S| + eps vs (1-band) c ||phi||_1, {mode.label}", meas + eps, (1 - band) * c0 * norm,
                   ">=", 0.0, provenance="midpoint counting on a nodal cell", notes=f"c={c:.6g} eta={eta:.6g}")
        report.add(f"stability of c, {mode.label}", abs(c / c0 - 1), band, "<=", 0.0)
    return report


# -- curve hitting ---------------------------------------------------------

def run_curve_hitting(distances=(0.5, 0.2, 0.1, 0.05), length: float = 1.0, t: float = 1.0,
                      cfg: Optional[PathEnsembleConfig] = None, seed: int = DEFAULT_SEED) -> ExperimentReport:
    """Planar Brownian motion hitting a straight segment at distance d within time t."""
    if length < 1:
        raise RegimeError("segment length must be at least 1")
    cfg = cfg or PathEnsembleConfig(n_paths=100_000, dt=1e-3, seed=seed)
    report = ExperimentReport("curve_hitting", {"distances": list(distances), "length": length, "t": t,
                                                "n_paths": cfg.n_paths}, cfg.seed,
                              header="hit probability >= 1 - c sqrt(d); c calibrated at the largest d")
    plane = Disk(1e3)    # far boundary: exit by time t has probability below e^-1e5
    ds = sorted(float(d) for d in distances)
    est = {}
    for d in ds:
        tgt = Target.segment([-length / 2, d], [length / 2, d])
        est[d] = killed_hit_prob(plane, tgt, [0.0, 0.0], t, cfg.with_(max_time=max(cfg.max_time, t)))
    for a, b in zip(ds[:-1], ds[1:]):
        ea, eb = est[a], est[b]
        se = math.hypot(ea.std_err, eb.std_err)
        report.add(f"monotone in d: p({b:g}) <= p({a:g})", eb.p_hat, ea.p_hat + N_SIGMA * se, "<=", 0.0, std_err=se)
    d_max = ds[-1]
    c = (1 - est[d_max].p_hat) / math.sqrt(d_max)
    report.add("fitted c", c, c, "==", 0.0, INFO, notes=f"calibrated at d={d_max:g}")
    for d in ds[:-1]:
        e = est[d]
        report.add(f"p({d:g}) >= 1 - c sqrt(d)", e.p_hat, 1 - c * math.sqrt(d) - N_SIGMA * e.std_err, ">=", 0.0,
                   std_err=e.std_err, notes=f"residual={e.p_hat - (1 - c * math.sqrt(d)):.4g}")
    return report


# -- heat identities and Theta cross-checks --------------------------------

def run_heat_identity(cases=None, richardson: bool = True, seed: int = DEFAULT_SEED,
                      tol: float = 1e-3, tol_extrapolated: float = 1e-4) -> ExperimentReport:
    from .geometry import Interval, Rectangle
    cases = cases or [(Interval(), em.IntervalMode(1), t, 1e-3) for t in (0.1, 0.5)] + \
        [(Rectangle(), em.RectangleMode(1, 1), t, 5e-3) for t in (0.1, 0.5)]
    report = ExperimentReport("heat_identity", {"cases": [f"{type(d).__name__} {m.label} t={t:g} h={h:g}"
                                                          for d, m, t, h in cases]}, seed,
                              header="int p_t |phi| = (1 - e^{-t lam}) int |phi| per nodal domain")
    for dom, mode, t, h in cases:
        row = hg.check_heat_content_identity(dom, mode, t, h, richardson=richardson)
        tag = f"{type(dom).__name__} {mode.label} t={t:g} h={h:g}"
        report.add(f"relative residual {tag}", row["residual"], tol, "<=", 0.0, provenance="heatgrid",
                   notes=f"lhs={row['lhs']:.12g} rhs={row['rhs']:.12g}")
        if richardson:
            report.add(f"relative residual after h -> h/2 extrapolation {tag}", row["residual_extrapolated"],
                       tol_extrapolated, "<=", 0.0, provenance="heatgrid Richardson")
    return report


def run_p_norm_identity(p_values=(2.0, 1.5), t: float = 0.25, seed: int = DEFAULT_SEED) -> ExperimentReport:
    from .geometry import Interval, Rectangle
    report = ExperimentReport("p_norm_identity", {"p": list(p_values), "t": t}, seed,
                              header="int p_t |phi|^p <= (1 - e^{-p lam t}) ||phi||_p^p, deficit from Duhamel")
    for dom, mode, h in ((Interval(), em.IntervalMode(1), 1e-3), (Rectangle(), em.RectangleMode(1, 1), 1e-2)):
        for p in p_values:
            row = hg.check_p_norm_identity(dom, mode, p, t, h)
            tag = f"{mode.label} p={p:g}"
            report.add(f"heat content inequality {tag}", row["lhs"], row["rhs"], "<=", 0.0, provenance="heatgrid")
            report.add(f"deficit nonnegative {tag}", row["deficit"], 0.0, ">=", 0.0)
            report.add(f"deficit matches Duhamel integral {tag}", row["deficit"], row["deficit_duhamel"], "==",
                       1e-3 * max(row["deficit"], 1e-12) + 1e-9, provenance="Gauss-Legendre in time")
    return report


def theta_crosscheck_row(report: ExperimentReport, n: int, ratio: float, cfg: PathEnsembleConfig,
                         r: float = 1.0, dt_scale: float = 2.5e-3) -> None:
    t = r * r / ratio
    ref = theta_bessel(ThetaQuery(n, r, t)).value
    from .geometry import Interval
    dom = Interval(-r, r) if n == 1 else Disk(r, n)
    c = cfg.with_(dt=min(cfg.dt, dt_scale * r * r), max_time=max(cfg.max_time, t))
    est = mc_exit_prob(dom, np.zeros(n), t, c)
    se = est.null_std_err(ref)
    report.add(f"Theta_{n}(r^2/t={ratio:g}): Monte Carlo vs Bessel series", est.p_hat, ref, "==",
               N_SIGMA * se + 1e-15, std_err=se, provenance="mc_exit_prob; theta_bessel",
               notes=f"z={(est.p_hat - ref) / se if se > 0 else 0.0:.3f}")


def run_theta_table(ns=(1, 2, 3), ratios=(0.5, 1.0, 2.0, 4.0, 9.0), cfg: Optional[PathEnsembleConfig] = None,
                    monte_carlo: bool = True, seed: int = DEFAULT_SEED) -> ExperimentReport:
    from .theta import theta_cube_bound, theta_gamma
    cfg = cfg or PathEnsembleConfig(n_paths=100_000, seed=seed)
    report = ExperimentReport("theta_table", {"n": list(ns), "ratios": list(ratios),
                                              "n_paths": cfg.n_paths if monte_carlo else 0}, cfg.seed,
                              header="Theta_n(r^2/t), generatorDelta convention")
    for n in ns:
        for ratio in ratios:
            q = ThetaQuery(n, 1.0, 1.0 / ratio)
            b = theta_bessel(q)
            report.add(f"Theta_{n}({ratio:g}) bessel series", b.value, b.value, "==", 0.0, INFO,
                       notes=f"error_bound={b.error_bound:.3g}")
            g = theta_gamma(q)
            report.add(f"Theta_{n}({ratio:g}) incomplete-gamma route", g.value, b.value, "==", 0.0, INFO,
                       notes="time-integral quantity, not a probability")
            cb = theta_cube_bound(q)
            report.add(f"Theta_{n}({ratio:g}) cube formula", cb.value, b.value, "==", 0.0, INFO,
                       notes="all-coordinates escape probability")
            if monte_carlo:
                theta_crosscheck_row(report, n, ratio, cfg)
    return report


# -- registry --------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: str            # float, int, floats, ints, mode, modes, triples, str, bool
    default: object = None
    help: str = ""


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    reference: str
    params: dict
    runner: Callable          # runner(params, mc_config) -> ExperimentReport
    validate: Callable = lambda p: []
    uses_mc: bool = False


def _v_lower(p):
    errs = []
    for r0 in p["r0"]:
        for t0 in p["t0"]:
            if not 0 < t0 <= r0**2:
                errs.append(f"t0 <= r0^2 required (small-time regime 0 < t <= r^2): r0={r0:g}, t0={t0:g}")
    for m in p["modes"]:
        if not isinstance(m.domain, CLOSED):
            errs.append(f"{m.label} is not on a closed geometry")
    return errs


def _v_upper(p):
    errs = [] if p["p"] in (1, 2, 4) else [f"p must be 1, 2 or 4, got {p['p']:g}"]
    if not 0 < p["t0"] <= p["r0"] ** 2:
        errs.append(f"t0 <= r0^2 required (small-time regime): r0={p['r0']:g}, t0={p['t0']:g}")
    return errs


def _v_levelset(p):
    errs = []
    cases = p["cases"]
    if len(cases) % 3:
        errs.append("cases must be a flat list of (mu, eta, tau) triples")
    for i in range(0, len(cases) - len(cases) % 3, 3):
        mu, eta, tau = cases[i:i + 3]
        if not 0 < mu < eta <= 1:
            errs.append(f"0 < mu < eta <= 1 required, got mu={mu:g}, eta={eta:g}")
        if not tau > 0:
            errs.append(f"tau must be positive, got {tau:g}")
    return errs


def _v_sublevel(p):
    errs = []
    for m in p["modes"]:
        if not isinstance(m, em._Separable) or not isinstance(m.domain, (Circle, Torus2)):
            errs.append(f"{m.label}: sublevel measurement needs a separable mode on a circle or torus")
            continue
        eta = (1 - p["eps"] / (3 * m.domain.volume())) * math.exp(p["t0"])
        if eta > 1:
            errs.append(f"eta recipe infeasible for {m.label}: (1 - eps/(3|M|)) e^t0 = {eta:.4g} > 1")
    return errs


def _v_beam(p):
    return [f"l={l} outside 1..1000" for l in p["l"] if not 1 <= l <= 1000]


def _v_curve(p):
    errs = [] if p["length"] >= 1 else ["segment length must be at least 1"]
    errs += [f"distance must be positive, got {d:g}" for d in p["distances"] if d <= 0]
    return errs


def _v_sz(p):
    errs = []
    for m in p["modes"]:
        if not isinstance(m, em._Separable) or not isinstance(m.domain, (Circle, Torus2)):
            errs.append(f"{m.label}: needs a separable mode on a circle or torus")
    if p["f"] not in TEST_FUNCTIONS:
        errs.append(f"unknown test function {p['f']!r}; choose from {sorted(TEST_FUNCTIONS)}")
    return errs


def _sz_runner(p, mc):
    report = ExperimentReport("sogge_zelditch", {"modes": [m.label for m in p["modes"]], "f": p["f"]}, mc.seed)
    for m in p["modes"]:
        verify_sogge_zelditch(m, p["f"], p["tol"], report=report)
    return report


def _levelset_runner(p, mc):
    c = p["cases"]
    triples = [tuple(c[i:i + 3]) for i in range(0, len(c), 3)]
    return run_levelset(triples, mc, dt=p["dt"])


def _upper_runner(p, mc):
    return run_concentration_upper(p["modes"], p["r0"], p["t0"], p["p"], seed=mc.seed)


REGISTRY: dict[str, ExperimentSpec] = {}


def register(spec: ExperimentSpec) -> ExperimentSpec:
    REGISTRY[spec.name] = spec
    return spec


register(ExperimentSpec(
    "theta_table", "Theta_n(r^2/t): Bessel series, gamma route, cube formula, Monte Carlo",
    {"n": Param("ints", [1, 2, 3]), "ratios": Param("floats", [1.0, 2.0, 4.0, 9.0]),
     "monte_carlo": Param("bool", False)},
    lambda p, mc: run_theta_table(p["n"], p["ratios"], mc, p["monte_carlo"]),
    lambda p: [f"n={n} must be >= 1" for n in p["n"] if n < 1] + [f"ratio {r:g} must be positive" for r in p["ratios"] if r <= 0],
    uses_mc=True))
register(ExperimentSpec(
    "concentration_lower", "Theorem conc_L1: ||phi||_L1(T_r) >= (1 - e^{-t lam} - C1 Theta_n(r^2/t)) ||phi||_L1",
    {"modes": Param("modes", ["circle(5)", "circle(10)", "circle(20)"]), "r0": Param("floats", [1.0, 2.0, 3.0]),
     "t0": Param("floats", [0.05, 0.1]), "c1": Param("float", 1.0)},
    lambda p, mc: concentration_lower_sweep(p["modes"], p["r0"], p["t0"], p["c1"], seed=mc.seed), _v_lower))
register(ExperimentSpec(
    "concentration_upper", "Theorem conc_L1_n=2: ||phi||_Lp(T_r) <= C3 (1 - e^{-p t0})^{1/p} ||phi||_p",
    {"modes": Param("modes", [f"torus({m},{m})" for m in range(5, 41, 5)]), "r0": Param("float", 1.0),
     "t0": Param("float", 1.0), "p": Param("float", 1.0)},
    _upper_runner, _v_upper))
register(ExperimentSpec(
    "sogge_zelditch", "Proposition SZ: int ((Delta+lam) f)|phi| = 2 int_N f |grad phi|",
    {"modes": Param("modes", [f"circle({k})" for k in range(1, 21)]), "f": Param("str", "one"),
     "tol": Param("float", 1e-6)},
    _sz_runner, _v_sz))
register(ExperimentSpec(
    "gaussian_beam", "Highest-weight spherical harmonics: tube mass over T_(1/l) scales like (lp)^(-1/2)",
    {"l": Param("ints", [50, 100, 200, 400]), "p": Param("float", 2.0)},
    lambda p, mc: run_gaussian_beam(p["l"], p["p"], seed=mc.seed), _v_beam))
register(ExperimentSpec(
    "avoided_crossing", "Avoided crossings: p_ib + sum p_ij + p_ie = 1, Gaussian decay of p_ij, diameter bound",
    {"widths": Param("floats", [0.02, 0.01, 0.005]), "cubes": Param("int", 8), "t0": Param("float", 0.2),
     "scan_paths": Param("int", 20000)},
    lambda p, mc: run_avoided_crossing(p["widths"], p["cubes"], p["t0"], mc, p["scan_paths"]),
    lambda p: [f"width {w:g} must be positive" for w in p["widths"] if w <= 0] + ([] if p["cubes"] >= 4 else ["cubes must be >= 4"]),
    uses_mc=True))
register(ExperimentSpec(
    "narrow_branch", "Theorem decay_narrow_branch: phi(x) <= e^{lam/lam0}(1 - psi(1/lam0, x)) ||phi||_inf",
    {"lobe_size": Param("float", 1.0), "channel_width": Param("float", 0.05), "channel_length": Param("float", 1.0),
     "lam0_factors": Param("floats", [10.0, 100.0]), "h": Param("float", 0.01)},
    lambda p, mc: run_narrow_branch(Dumbbell(p["lobe_size"], p["channel_width"], p["channel_length"]),
                                    p["lam0_factors"], p["h"], mc),
    lambda p: [] if 0 < p["channel_width"] < p["lobe_size"] else ["channel_width must be below lobe_size"],
    uses_mc=True))
register(ExperimentSpec(
    "levelset", "Proposition level_sets_interaction: killed hitting of {phi > eta} <= (mu/eta)(1 - e^{-lam tau})/lam",
    {"cases": Param("floats", [0.5, 0.9, 1.0, 0.3, 0.8, 0.5, 0.7, 0.95, 2.0]), "dt": Param("float", 1e-4)},
    _levelset_runner, _v_levelset, uses_mc=True))
register(ExperimentSpec(
    "sublevel_tube", "Sub-level sets: |T_delta cap S_eta| + eps >= c ||phi||_L1",
    {"modes": Param("modes", [f"circle({k})" for k in (5, 10, 20, 40)]), "delta0": Param("float", 1.0),
     "t0": Param("float", 0.02), "eps": Param("float", 0.5)},
    lambda p, mc: run_sublevel_tube(p["modes"], p["delta0"], p["t0"], p["eps"], seed=mc.seed), _v_sublevel))
register(ExperimentSpec(
    "curve_hitting", "Beurling-Nevanlinna step: hitting a segment at distance d has probability >= 1 - c sqrt(d)",
    {"distances": Param("floats", [0.5, 0.2, 0.1, 0.05]), "length": Param("float", 1.0), "t": Param("float", 1.0)},
    lambda p, mc: run_curve_hitting(p["distances"], p["length"], p["t"], mc), _v_curve, uses_mc=True))
register(ExperimentSpec(
    "heat_identity", "Lemma SZ-for-pt(x): int p_t phi = (1 - e^{-t lam}) int phi",
    {"richardson": Param("bool", True)},
    lambda p, mc: run_heat_identity(richardson=p["richardson"], seed=mc.seed)))
register(ExperimentSpec(
    "p_norm_identity", "Duhamel step: int p_t |phi|^p <= (1 - e^{-p lam t}) ||phi||_p^p",
    {"p": Param("floats", [2.0, 1.5]), "t": Param("float", 0.25)},
    lambda p, mc: run_p_norm_identity(p["p"], p["t"], seed=mc.seed),
    lambda p: [f"p must exceed 1, got {v:g}" for v in p["p"] if v <= 1]))
