"""Command-line entry point: parse a run config and a data file, emit CSVs.

Usage: epvar <mode-config-file> <data-file> [--out DIR]

The config is line-oriented ``key=value`` with ``#`` comments.  Keys:

    mode    solve | sticky | characteristics | radial | entropy | compare | converge
    kappa   forcing constant (sign selects attractive/repulsive/neutral)
    times   comma-separated snapshot times, nonnegative and sorted
    grid    min,max,count query grid (labels for characteristics mode)
    n_quad  quadrature subcells per density piece (default 1000)
    dt      entropy time step (default 1e-3 * max time)
    n       space dimension (radial mode)
    out     output directory (overridden by --out)

Exit codes: 0 success, 2 config error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import sticky
from .characteristics import critical_times, evolve_smooth
from .fields import differentiate
from .measure_data import DataFormatError, load_initial_data, discretize
from .radial import RadialData, solve_radial
from .validator import Resolution, convergence_study
from .variational import ExclusionSet, build_tables, evaluate_entropy_slice, evaluate_slice

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main", "console_main"]

MODES = ("solve", "sticky", "characteristics", "radial", "entropy", "compare", "converge")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


class ConfigError(ValueError):
    """Raised for malformed or incomplete run configs."""


@dataclass
class RunConfig:
    mode: str
    kappa: float
    times: list[float]
    grid: tuple[float, float, int] | None = None
    n_quad: int = 1000
    dt: float | None = None
    dimension: int | None = None
    out: str | None = None


def _parse_number(value: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: malformed number {value!r}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run config; errors carry the offending line."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in ("mode", "kappa", "times", "grid", "n_quad", "dt", "n", "out"):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = (value, lineno)

    for req in ("mode", "kappa", "times"):
        if req not in raw:
            raise ConfigError(f"missing required key {req!r}")
    mode, _ = raw["mode"]
    mode = mode.lower()
    if mode not in MODES:
        raise ConfigError(f"line {raw['mode'][1]}: unknown mode {mode!r}")

    kappa = _parse_number(*raw["kappa"])

    tval, tline = raw["times"]
    times = [_parse_number(p.strip(), tline) for p in tval.replace(",", " ").split()]
    if not times:
        raise ConfigError(f"line {tline}: times list is empty")
    for t in times:
        if t < 0:
            raise ConfigError(f"line {tline}: negative time {t:g}")
    if times != sorted(times):
        raise ConfigError(f"line {tline}: times must be sorted")

    grid = None
    if "grid" in raw:
        gval, gline = raw["grid"]
        parts = [p.strip() for p in gval.replace(",", " ").split()]
        if len(parts) != 3:
            raise ConfigError(f"line {gline}: grid needs min,max,count")
        lo, hi = _parse_number(parts[0], gline), _parse_number(parts[1], gline)
        count = int(_parse_number(parts[2], gline))
        if count < 2:
            raise ConfigError(f"line {gline}: grid count must be >= 2")
        if hi <= lo:
            raise ConfigError(f"line {gline}: grid needs min < max")
        grid = (lo, hi, count)
    elif mode not in ("sticky",):
        raise ConfigError(f"mode {mode!r} requires a grid")

    n_quad = 1000
    if "n_quad" in raw:
        n_quad = int(_parse_number(*raw["n_quad"]))
        if n_quad < 1:
            raise ConfigError(f"line {raw['n_quad'][1]}: n_quad must be >= 1")

    dt = None
    if "dt" in raw:
        dt = _parse_number(*raw["dt"])
        if dt <= 0:
            raise ConfigError(f"line {raw['dt'][1]}: dt must be positive")

    dimension = None
    if "n" in raw:
        dimension = int(_parse_number(*raw["n"]))
    if mode == "radial" and dimension is None:
        raise ConfigError("missing dimension: radial mode requires key 'n'")

    out = raw["out"][0] if "out" in raw else None
    return RunConfig(mode=mode, kappa=kappa, times=times, grid=grid,
                     n_quad=n_quad, dt=dt, dimension=dimension, out=out)


def _fmt(v) -> str:
    return f"{v:.17g}"


def _write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0]) if columns else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def _time_tag(t: float) -> str:
    return f"{t:g}"


def _write_slice_outputs(out_dir: str, t: float, slc, fs) -> None:
    tag = _time_tag(t)
    _write_csv(os.path.join(out_dir, f"slice_{tag}.csv"),
               ["x", "y", "R", "M", "rho_ac", "m_ac", "u", "E"],
               [fs.x, slc.y, slc.R, slc.M, fs.rho, fs.mom, fs.u, fs.E])
    atoms = fs.atoms
    _write_csv(os.path.join(out_dir, f"atoms_{tag}.csv"),
               ["z", "mass", "momentum", "velocity"],
               [np.array([a.position for a in atoms]),
                np.array([a.mass for a in atoms]),
                np.array([a.momentum for a in atoms]),
                np.array([a.velocity for a in atoms])])


def _x_grid(config: RunConfig) -> np.ndarray:
    lo, hi, count = config.grid
    return np.linspace(lo, hi, count)


def _run_solve(config: RunConfig, data, out_dir: str) -> None:
    tables = build_tables(discretize(data, config.n_quad), config.kappa)
    x = _x_grid(config)
    for t in config.times:
        slc = evaluate_slice(tables, t, x)
        _write_slice_outputs(out_dir, t, slc, differentiate(slc))


def _run_entropy(config: RunConfig, data, out_dir: str) -> None:
    tables = build_tables(discretize(data, config.n_quad), config.kappa)
    x = _x_grid(config)
    dt = config.dt if config.dt is not None else 1e-3 * max(config.times[-1], 1e-9)
    history = ExclusionSet()
    for t in config.times:
        slc, history = evaluate_entropy_slice(tables, t, x, history, dt)
        _write_slice_outputs(out_dir, t, slc, differentiate(slc))


def _run_sticky(config: RunConfig, data, out_dir: str) -> None:
    events: list[sticky.MergeEvent] = []
    snaps = sticky.run(data, config.kappa, config.times[-1], config.n_quad,
                       snapshot_times=config.times, events=events)
    _write_csv(os.path.join(out_dir, "events.csv"),
               ["t", "x", "mass", "u"],
               [np.array([e.time for e in events]),
                np.array([e.position for e in events]),
                np.array([e.mass for e in events]),
                np.array([e.velocity for e in events])])
    with open(os.path.join(out_dir, "trajectories.csv"), "w", encoding="utf-8") as fh:
        fh.write(sticky.export_trajectories(snaps))


def _run_characteristics(config: RunConfig, data, out_dir: str) -> None:
    tc1, tc2 = critical_times(data, config.kappa)
    with open(os.path.join(out_dir, "critical_times.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"t_c1={tc1:g}\n")
        fh.write(f"t_c2={tc2:g}\n")
    lo, hi, count = config.grid
    supp = data.ac_density.support()
    labels = np.linspace(max(lo, supp[0]), min(hi, supp[1]), count)
    for t in config.times:
        if t >= tc1:
            raise ValueError(
                f"requested time {t:g} is beyond the breakdown time t_c1 = {tc1:g}")
        fan = evolve_smooth(data, config.kappa, t, labels=labels)
        _write_csv(os.path.join(out_dir, f"characteristics_{_time_tag(t)}.csv"),
                   ["alpha", "x", "u", "Gamma", "rho"],
                   [fan.labels, fan.x, fan.u, fan.gamma, fan.rho])


def _run_radial(config: RunConfig, data, out_dir: str) -> None:
    if data.atoms:
        raise DataFormatError("radial mode accepts ac data only (no atoms)")
    rdata = RadialData(config.dimension, data.ac_density, data.velocity)
    lo, hi, count = config.grid
    if lo < 0:
        raise ValueError("radial grid must satisfy r >= 0")
    r = np.linspace(lo, hi, count)
    for t in config.times:
        rs = solve_radial(rdata, config.kappa, t, r, n_quad=config.n_quad)
        tag = _time_tag(t)
        _write_csv(os.path.join(out_dir, f"slice_{tag}.csv"),
                   ["x", "y", "R", "M", "rho_ac", "m_ac", "u", "E"],
                   [rs.r, rs.y, rs.R, rs.M, rs.rho, rs.m_varsigma, rs.w, rs.R])
        _write_csv(os.path.join(out_dir, f"atoms_{tag}.csv"),
                   ["z", "mass", "momentum", "velocity"],
                   [np.array([a.position for a in rs.atoms]),
                    np.array([a.mass for a in rs.atoms]),
                    np.array([a.momentum for a in rs.atoms]),
                    np.array([a.velocity for a in rs.atoms])])


def _run_compare(config: RunConfig, data, out_dir: str) -> None:
    tables = build_tables(discretize(data, config.n_quad), config.kappa)
    x = _x_grid(config)
    snaps = sticky.run(data, config.kappa, config.times[-1], config.n_quad,
                       snapshot_times=config.times)
    lines = ["t,max_R_diff,max_M_diff"]
    worst_r = worst_m = 0.0
    for snap, t in zip(snaps, config.times):
        slc = evaluate_slice(tables, t, x)
        dr = float(np.max(np.abs(slc.R - sticky.mass_profile(snap, x))))
        dm = float(np.max(np.abs(slc.M - sticky.momentum_profile(snap, x))))
        worst_r, worst_m = max(worst_r, dr), max(worst_m, dm)
        lines.append(f"{_fmt(t)},{_fmt(dr)},{_fmt(dm)}")
    with open(os.path.join(out_dir, "compare.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"max |R_var - R_sticky| = {worst_r:.3e}")
    print(f"max |M_var - M_sticky| = {worst_m:.3e}")


def _run_converge(config: RunConfig, data, out_dir: str) -> None:
    lo, hi, count = config.grid
    t_end = config.times[-1]
    nt = max(9, int(round(1.0 / (config.dt / t_end))) if config.dt else 33)
    ladder = [
        Resolution(max(8, config.n_quad // 4), max(16, count // 4), max(9, nt // 4)),
        Resolution(max(8, config.n_quad // 2), max(16, count // 2), max(9, nt // 2)),
        Resolution(config.n_quad, count, nt),
    ]
    report = convergence_study(data, config.kappa, t_end, ladder)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(os.path.join(out_dir, "residuals.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())


_RUNNERS = {
    "solve": _run_solve,
    "entropy": _run_entropy,
    "sticky": _run_sticky,
    "characteristics": _run_characteristics,
    "radial": _run_radial,
    "compare": _run_compare,
    "converge": _run_converge,
}


def run(config: RunConfig, data, out_dir: str) -> int:
    """Dispatch a validated config; raises on solver errors."""
    os.makedirs(out_dir, exist_ok=True)
    _RUNNERS[config.mode](config, data, out_dir)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="epvar",
        description="Variational solver for the 1D pressureless Euler-Poisson system")
    parser.add_argument("config", help="run config file (key=value lines)")
    parser.add_argument("data", help="initial-data file")
    parser.add_argument("--out", default=None, help="output directory (default ./out)")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = parse_config(fh.read())
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        data = load_initial_data(args.data)
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out_dir = args.out or config.out or "out"
    try:
        return run(config, data, out_dir)
    except (ValueError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def console_main() -> None:
    sys.exit(main())
