"""Command-line entry point: experiment runner plus theta, mc, grid and list tools.

Config files are line-oriented ``key = value`` with ``[section]`` headers.
``[mc]`` and ``[output]`` are global; every other section names a registered
experiment and lists its parameters::

    [mc]
    n_paths = 100000
    seed = 20240611

    [output]
    directory = reports
    format = both

    [concentration_lower]
    modes = circle(5), circle(10)
    r0 = 1, 2
    t0 = 0.05
"""

from __future__ import annotations

import argparse
import configparser
import csv
import re
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import eigenmodel as em
from . import experiments as ex
from . import heatgrid as hg
from .geometry import eval_number, parse_domain
from .stochastic import (DEFAULT_SEED, PathEnsembleConfig, Target, feynman_kac, killed_hit_prob,
                         mc_exit_prob)
from .theta import CONVENTIONS, GENERATOR_DELTA, METHODS, ThetaError, ThetaQuery, theta

EXIT_OK, EXIT_FAIL, EXIT_ABORT = 0, 1, 2
FORMATS = ("csv", "json", "both")
MC_KEYS = {"n_paths": int, "dt": float, "seed": int, "boundary_correction": str, "max_time": float,
           "threads": int}
OUTPUT_KEYS = {"directory": str, "format": str}
GLOBAL_SECTIONS = ("mc", "output")


class ConfigError(ValueError):
    """Every violation found while parsing a config, not just the first."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class RunConfig:
    experiments: list = field(default_factory=list)     # [(name, params)] in declaration order
    mc: PathEnsembleConfig = field(default_factory=PathEnsembleConfig)
    output: str = "reports"
    format: str = "both"


def split_top(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return [p for p in parts if p]


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = eval_number(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _expand_modes(token: str) -> list:
    # circle(1..20) expands to circle(1), ..., circle(20); torus(5..40:5) steps by 5
    m = re.fullmatch(r"\s*(\w+)\((\d+)\.\.(\d+)(?::(\d+))?\)\s*", token)
    if m:
        name, lo, hi, step = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4) or 1)
        out = []
        for k in range(lo, hi + 1, step):
            out.append(em.parse_mode(f"{name}({k},{k})" if name == "torus" else f"{name}({k})"))
        return out
    return [em.parse_mode(token)]


def parse_value(kind: str, text: str):
    if kind == "float":
        return float(eval_number(text))
    if kind == "int":
        return _parse_int(text)
    if kind == "bool":
        return _parse_bool(text)
    if kind == "str":
        return text.strip()
    if kind == "floats":
        return [float(eval_number(t)) for t in split_top(text)]
    if kind == "ints":
        return [_parse_int(t) for t in split_top(text)]
    if kind == "modes":
        return [m for t in split_top(text) for m in _expand_modes(t)]
    raise ValueError(f"unknown parameter kind {kind!r}")


def _default(kind: str, value):
    if kind == "modes":
        return [m for t in value for m in _expand_modes(t)]
    return list(value) if isinstance(value, list) else value


_SECTION = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _scan_duplicates(text: str) -> list[str]:
    """configparser in non-strict mode merges duplicates silently; report them instead."""
    errors, sections, keys, current = [], set(), set(), None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith(("#", ";")):
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1).strip()
            if current in sections:
                errors.append(f"line {lineno}: duplicate section [{current}]")
            sections.add(current)
            keys = set()
            continue
        m = _KEY.match(line)
        if m and current is not None and not line[0].isspace():
            key = m.group(1).strip().lower()
            if key in keys:
                errors.append(f"line {lineno}: duplicate key {key!r} in [{current}]")
            keys.add(key)
    return errors


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run config, collecting every violation."""
    errors = _scan_duplicates(text)
    parser = configparser.ConfigParser(strict=False, interpolation=None, default_section="\0none")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(errors + [f"malformed config: {exc.message if hasattr(exc, 'message') else exc}"])
    cfg = RunConfig()
    mc_fields = {}
    if parser.has_section("mc"):
        for key, raw in parser.items("mc"):
            if key not in MC_KEYS:
                errors.append(f"[mc]: unknown key {key!r} (known: {', '.join(sorted(MC_KEYS))})")
                continue
            try:
                mc_fields[key] = _parse_int(raw) if MC_KEYS[key] is int else MC_KEYS[key](
                    eval_number(raw) if MC_KEYS[key] is float else raw.strip())
            except ValueError as exc:
                errors.append(f"[mc] {key}: {exc}")
        try:
            cfg.mc = PathEnsembleConfig(**mc_fields)
        except ValueError as exc:
            errors.append(f"[mc]: {exc}")
    if parser.has_section("output"):
        for key, raw in parser.items("output"):
            if key not in OUTPUT_KEYS:
                errors.append(f"[output]: unknown key {key!r} (known: directory, format)")
            elif key == "format":
                if raw.strip() not in FORMATS:
                    errors.append(f"[output] format must be one of {FORMATS}, got {raw.strip()!r}")
                else:
                    cfg.format = raw.strip()
            else:
                cfg.output = raw.strip()
    for section in parser.sections():
        if section in GLOBAL_SECTIONS:
            continue
        spec = ex.REGISTRY.get(section)
        if spec is None:
            errors.append(f"unknown experiment [{section}] (known: {', '.join(sorted(ex.REGISTRY))})")
            continue
        params, bad = {}, False
        for key, raw in parser.items(section):
            if key not in spec.params:
                errors.append(f"[{section}]: unknown key {key!r} (known: {', '.join(sorted(spec.params))})")
                continue
            try:
                params[key] = parse_value(spec.params[key].kind, raw)
            except (ValueError, TypeError) as exc:
                errors.append(f"[{section}] {key}: {exc}")
                bad = True
        for key, prm in spec.params.items():
            if key not in params:
                params[key] = _default(prm.kind, prm.default)
        if not bad:
            errors.extend(f"[{section}]: {msg}" for msg in spec.validate(params))
        cfg.experiments.append((section, params))
    if errors:
        raise ConfigError(errors)
    return cfg


def run(config: RunConfig, seed: Optional[int] = None, threads: Optional[int] = None,
        out: Optional[str] = None, write: bool = True, log=sys.stderr) -> tuple[list, int]:
    """Run experiments in declaration order; returns (reports, exit code)."""
    mc = config.mc
    if seed is not None:
        mc = mc.with_(seed=seed)
    if threads is not None:
        mc = mc.with_(threads=threads)
    directory = out or config.output
    reports, aborted, failed = [], False, False
    for name, params in config.experiments:
        spec = ex.REGISTRY[name]
        try:
            report = spec.runner(params, mc)
        except Exception as exc:  # one bad driver must not take down the others
            print(f"{name}: aborted: {type(exc).__name__}: {exc}", file=log)
            aborted = True
            continue
        report.seed = mc.seed
        reports.append(report)
        failed |= not report.passed
        if write:
            report.write(directory, config.format)
        for line in report.summary_lines():
            print(f"{name}: {line}", file=log)
    code = EXIT_ABORT if aborted else EXIT_FAIL if failed else EXIT_OK
    return reports, code


# -- subcommands -----------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(eval_number(t)) for t in split_top(text)]


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            config = parse_config(fh.read())
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_ABORT
    _, code = run(config, args.seed, args.threads, args.out)
    return code


def cmd_theta(args) -> int:
    methods = [m for m in METHODS if m != "monte_carlo"] if args.method == "all" else [args.method]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "r", "t", "ratio", "method", "value", "error_bound", "convention"])
    for n in args.n:
        for r in args.r:
            for t in args.t:
                q = ThetaQuery(n, r, t, args.convention)
                for method in methods:
                    kwargs = {}
                    if method == "monte_carlo":
                        kwargs["cfg"] = PathEnsembleConfig(n_paths=args.paths, seed=args.seed,
                                                           dt=min(1e-3, r * r / 1000), max_time=max(100.0, 2 * t))
                    try:
                        row = theta(q, method, **kwargs).row()
                    except ThetaError as exc:
                        print(f"n={n} r={r} t={t} {method}: {exc}", file=sys.stderr)
                        continue
                    w.writerow([row[k] if not isinstance(row[k], float) else repr(row[k])
                                for k in ("n", "r", "t", "ratio", "method", "value", "error_bound", "convention")])
    return EXIT_OK


def _target(text: Optional[str]):
    if not text:
        return None
    vals = _floats(text)
    return Target.ball(vals[:-1], vals[-1])


def cmd_mc(args) -> int:
    domain = parse_domain(args.domain)
    x = _floats(args.x)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["estimator", "domain", "x", "t", "value", "std_err", "n_paths", "seed", "bridge"])
    target = _target(args.target)
    if args.estimator == "hit" and target is None:
        print("--target cx,cy,...,radius is required for the hit estimator", file=sys.stderr)
        return EXIT_ABORT
    for t in args.t:
        cfg = PathEnsembleConfig(n_paths=args.paths, dt=args.dt, seed=args.seed, threads=args.threads,
                                 boundary_correction="brownian_bridge" if args.bridge == "on" else "none",
                                 max_time=max(100.0, t))
        if args.estimator == "exit":
            e = mc_exit_prob(domain, x, t, cfg)
            value, se = e.p_hat, e.std_err
        elif args.estimator == "survival":
            e = feynman_kac(domain, lambda y: np.ones(y.shape[0]), x, t, cfg)
            value, se = e.mean, e.std_err
        else:
            e = killed_hit_prob(domain, target, x, t, cfg)
            value, se = e.p_hat, e.std_err
        w.writerow([args.estimator, args.domain, " ".join(repr(v) for v in x), repr(t), repr(value), repr(se),
                    args.paths, args.seed, args.bridge])
    return EXIT_OK


def cmd_grid(args) -> int:
    domain = parse_domain(args.domain)
    if args.mode:
        mode = em.parse_mode(args.mode)
        field_ = hg.solve_dirichlet_semigroup(domain, mode.evaluate, args.t, args.h)
    else:
        field_ = hg.solve_heat_content(domain, args.t, args.h)
    path = args.out or "/dev/stdout"
    field_.to_csv(path)
    print(f"integral={field_.integral!r}", file=sys.stderr)
    return EXIT_OK


def cmd_list(args=None) -> int:
    for name in sorted(ex.REGISTRY):
        spec = ex.REGISTRY[name]
        print(f"{name}\t{spec.reference}")
        for key, prm in spec.params.items():
            print(f"    {key} ({prm.kind}) default={prm.default}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatlab", description=__doc__.split("\n")[0])
    p.add_argument("--list", action="store_true", help="list registered experiments and exit")
    sub = p.add_subparsers(dest="command")

    r = sub.add_parser("run", help="run the experiments named in a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None, help=f"override the config seed (default {DEFAULT_SEED})")
    r.add_argument("--threads", type=int, default=None, help="worker threads; results do not depend on it")
    r.add_argument("--out", default=None, help="output directory")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("theta", help="tabulate Theta_n(r^2/t) as CSV")
    t.add_argument("--n", type=int, nargs="+", required=True)
    t.add_argument("--r", type=float, nargs="+", default=[1.0])
    t.add_argument("--t", type=float, nargs="+", required=True)
    t.add_argument("--method", default="bessel_series", choices=list(METHODS) + ["all"])
    t.add_argument("--convention", default=GENERATOR_DELTA, choices=list(CONVENTIONS))
    t.add_argument("--paths", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=DEFAULT_SEED)
    t.set_defaults(func=cmd_theta)

    m = sub.add_parser("mc", help="Monte Carlo estimators, one CSV row per time")
    m.add_argument("--domain", required=True, help="e.g. disk(1), interval(0,pi), dumbbell(1,0.05,1)")
    m.add_argument("--x", required=True, help="start point, comma separated")
    m.add_argument("--t", type=float, nargs="+", required=True)
    m.add_argument("--estimator", default="exit", choices=["exit", "survival", "hit"])
    m.add_argument("--target", default=None, help="ball target for 'hit': centre coordinates then radius")
    m.add_argument("--paths", type=int, default=100_000)
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--seed", type=int, default=DEFAULT_SEED)
    m.add_argument("--threads", type=int, default=1)
    m.add_argument("--bridge", default="on", choices=["on", "off"])
    m.set_defaults(func=cmd_mc)

    g = sub.add_parser("grid", help="heat content (or semigroup of a mode) on a grid, as x,y,value CSV")
    g.add_argument("--domain", required=True)
    g.add_argument("--h", type=float, required=True)
    g.add_argument("--t", type=float, required=True)
    g.add_argument("--mode", default=None, help="propagate this eigenmode instead of computing heat content")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_grid)

    ls = sub.add_parser("list", help="list registered experiments")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        return cmd_list()
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_ABORT
    try:
        return args.func(args)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
