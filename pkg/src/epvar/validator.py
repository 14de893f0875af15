"""Convergence studies: residuals and cross-oracle distances over a ladder.

Each resolution level fixes (n_quad, nx, nt).  The study runs the
variational pipeline, measures the weak-form residuals against a fixed
seeded library of bump test functions, and measures the sup-distance of R
against the sticky simulation (kappa <= 0) or the entropy-restricted
variant (kappa > 0).  Orders are least-squares slopes in log-log against
the grid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import math

import numpy as np

from . import sticky
from .fields import BumpTestFunction, differentiate, weak_residual
from .measure_data import MeasureData1D, discretize
from .variational import ExclusionSet, build_tables, evaluate_entropy_slice, evaluate_slice

__all__ = ["Resolution", "ConvergenceReport", "convergence_study"]


@dataclass(frozen=True)
class Resolution:
    n_quad: int
    nx: int
    nt: int

    def finer_than(self, other: "Resolution") -> bool:
        return (self.n_quad >= other.n_quad and self.nx >= other.nx
                and self.nt >= other.nt
                and self.n_quad * self.nx * self.nt
                > other.n_quad * other.nx * other.nt)


@dataclass
class ConvergenceReport:
    kappa: float
    t_end: float
    seed: int
    resolutions: list[Resolution]
    mass_residuals: list[float]
    momentum_residuals: list[float]
    cross_distances: list[float]
    orders: dict = field(default_factory=dict)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"kappa={self.kappa:.17g}\n")
        out.write(f"t_end={self.t_end:.17g}\n")
        out.write(f"seed={self.seed}\n")
        out.write(f"levels={len(self.resolutions)}\n")
        for i, res in enumerate(self.resolutions):
            out.write(f"level{i}.n_quad={res.n_quad}\n")
            out.write(f"level{i}.nx={res.nx}\n")
            out.write(f"level{i}.nt={res.nt}\n")
            out.write(f"level{i}.mass_residual={self.mass_residuals[i]:.17g}\n")
            out.write(f"level{i}.momentum_residual={self.momentum_residuals[i]:.17g}\n")
            out.write(f"level{i}.cross_distance={self.cross_distances[i]:.17g}\n")
        for key, val in self.orders.items():
            out.write(f"order.{key}={val:.17g}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        lines = ["n_quad,nx,nt,mass_residual,momentum_residual,cross_distance"]
        for res, rm, rp, cd in zip(self.resolutions, self.mass_residuals,
                                   self.momentum_residuals, self.cross_distances):
            lines.append(f"{res.n_quad},{res.nx},{res.nt},"
                         f"{rm:.17g},{rp:.17g},{cd:.17g}")
        return "\n".join(lines) + "\n"


def _grid_hull(tables, times) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for t in times:
        arr = tables.arrivals(t)
        lo = min(lo, float(arr.min()))
        hi = max(hi, float(arr.max()))
    span = max(hi - lo, 1e-6)
    return lo - 0.1 * span, hi + 0.1 * span


def _bump_library(x_lo, x_hi, t_end, seed, n_bumps) -> list[BumpTestFunction]:
    rng = np.random.default_rng(seed)
    bumps = []
    for _ in range(n_bumps):
        cx = rng.uniform(x_lo + 0.3 * (x_hi - x_lo), x_hi - 0.3 * (x_hi - x_lo))
        rx = 0.25 * (x_hi - x_lo) * rng.uniform(0.6, 1.0)
        ct = rng.uniform(0.35 * t_end, 0.65 * t_end)
        rt = 0.3 * t_end * rng.uniform(0.6, 1.0)
        bumps.append(BumpTestFunction(cx, rx, ct, rt))
    return bumps


def _fit_order(hs, metrics) -> float:
    m = np.maximum(np.asarray(metrics, dtype=float), 1e-300)
    if np.all(m <= 1e-250):
        return math.inf
    slope = np.polyfit(np.log(np.asarray(hs, dtype=float)), np.log(m), 1)[0]
    return float(slope)


def convergence_study(data: MeasureData1D, kappa: float, t_end: float,
                      resolutions: list[Resolution], seed: int = 0,
                      n_bumps: int = 3) -> ConvergenceReport:
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    for coarse, fine in zip(resolutions[:-1], resolutions[1:]):
        if not fine.finer_than(coarse):
            raise ValueError("resolutions must be strictly increasing in fineness")

    mass_res, mom_res, cross = [], [], []
    bumps = None
    for res in resolutions:
        ps = discretize(data, res.n_quad)
        tables = build_tables(ps, kappa)
        times = np.linspace(0.0, t_end, res.nt)
        x_lo, x_hi = _grid_hull(tables, times)
        x_grid = np.linspace(x_lo, x_hi, res.nx)
        if bumps is None:
            bumps = _bump_library(x_lo, x_hi, t_end, seed, n_bumps)

        slices = [evaluate_slice(tables, float(t), x_grid) for t in times]
        fslices = [differentiate(s) for s in slices]
        rm = rp = 0.0
        for bump in bumps:
            a, b = weak_residual(fslices, bump)
            rm = max(rm, abs(a))
            rp = max(rp, abs(b))
        mass_res.append(rm)
        mom_res.append(rp)

        sample_times = [float(t) for t in times[1::max(1, res.nt // 5)]]
        if not sample_times:
            sample_times = [t_end]
        dist = 0.0
        if kappa <= 0:
            snaps = sticky.run(data, kappa, t_end, res.n_quad,
                               snapshot_times=sample_times)
            for snap, t in zip(snaps, sample_times):
                r_var = evaluate_slice(tables, t, x_grid).R
                r_st = sticky.mass_profile(snap, x_grid)
                dist = max(dist, float(np.max(np.abs(r_var - r_st))))
        else:
            history = ExclusionSet()
            dt = t_end / res.nt
            for t in sample_times:
                ent, history = evaluate_entropy_slice(tables, t, x_grid,
                                                      history, dt)
                r_var = evaluate_slice(tables, t, x_grid).R
                dist = max(dist, float(np.max(np.abs(r_var - ent.R))))
        cross.append(dist)

    report = ConvergenceReport(
        kappa=float(kappa), t_end=float(t_end), seed=seed,
        resolutions=list(resolutions), mass_residuals=mass_res,
        momentum_residuals=mom_res, cross_distances=cross)
    if len(resolutions) >= 3:
        hs = [1.0 / r.nx for r in resolutions]
        report.orders = {
            "mass_residual": _fit_order(hs, mass_res),
            "momentum_residual": _fit_order(hs, mom_res),
            "cross_distance": _fit_order(hs, cross),
        }
    return report
