"""Spherically symmetric n-dimensional flow reduced to the 1D machinery.

With radial density rho0(r) and velocity u0(r), the weighted quantities
varsigma = r^{n-1} rho and w obey the 1D system with field anchored at the
origin, E0(r) = integral_0^r s^{n-1} rho0(s) ds.  The reduction discretizes
the weighted measure with exact polynomial cell integrals, runs the
variational solver, and maps the potentials back to radial fields

    rho = (1/r^{n-1}) dR/dr,    u = (dM/dr) / (dR/dr).

Only r >= 0 is simulated; the particle at the origin carries zero field and
never moves.  Pointwise density is not reported below a small radius
(division by r^{n-1}); shell atoms carry (radius, mass, momentum) instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import differentiate
from .measure_data import (DataFormatError, MeasureData1D, ParticleSystem,
                           PiecewiseDensity, VelocityProfile)
from .variational import PrefixTables, SliceAtom, build_tables, evaluate_slice

__all__ = ["RadialData", "ReducedMeasure", "RadialSlice", "reduce_radial", "solve_radial"]

MIN_RECOVERY_RADIUS_REL = 1e-6


@dataclass(frozen=True)
class RadialData:
    """Radial profile (rho0(r), u0(r)) for r >= 0 and the dimension n."""

    dimension: int
    density: PiecewiseDensity
    velocity: VelocityProfile

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DataFormatError("dimension must be an integer >= 1")
        if self.density.is_empty:
            raise DataFormatError("radial data needs a nonzero density")
        if self.density.breakpoints[0] < 0:
            raise DataFormatError("radial breakpoints must satisfy r >= 0")
        if np.any(self.velocity.jump_sizes() != 0.0):
            raise DataFormatError("radial velocity must be continuous")
        lo, hi = self.density.support()
        if not self.velocity.covers(lo, hi):
            raise DataFormatError("velocity profile does not cover the density support")
        if float(self.density(0.0)) > 0 and abs(float(self.velocity(0.0))) > 0:
            raise DataFormatError("u0(0) must vanish when rho0(0) > 0")


@dataclass(frozen=True)
class ReducedMeasure:
    """The weighted measure varsigma0 = s^{n-1} rho0 with origin-anchored field."""

    dimension: int
    density: PiecewiseDensity
    velocity: VelocityProfile

    def weighted_cumulative(self, r) -> np.ndarray:
        """E0(r) = integral_0^r s^{n-1} rho0(s) ds, exact per linear piece."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        bp, vals = self.density.breakpoints, self.density.values
        out = np.zeros_like(r_arr)
        for a, b, ra, rb in zip(bp[:-1], bp[1:], vals[:-1], vals[1:]):
            upper = np.clip(r_arr, a, b)
            out += self._piece_integral(a, b, ra, rb, np.full_like(r_arr, a), upper)
        if np.isscalar(r) or np.ndim(r) == 0:
            return float(out[0])
        return out

    def _piece_integral(self, a, b, ra, rb, lo, hi) -> np.ndarray:
        """integral_lo^hi s^{n-1} (c0 + c1 s) ds for the linear piece on [a, b]."""
        n = self.dimension
        c1 = (rb - ra) / (b - a)
        c0 = ra - c1 * a
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return (c0 * (hi ** n - lo ** n) / n
                + c1 * (hi ** (n + 1) - lo ** (n + 1)) / (n + 1))

    def total_weighted_mass(self) -> float:
        return float(self.weighted_cumulative(self.density.breakpoints[-1]))

    def discretize(self, n_quad: int) -> ParticleSystem:
        """Cells per piece: exact weighted mass at the weighted centre of mass.

        The integrands s^{n-1} rho0 * {1, s, u0} are polynomials on every
        cell (pieces are split at velocity breakpoints), integrated in
        closed form, so weighted mass and momentum are preserved exactly.
        """
        if n_quad < 1:
            raise ValueError("n_quad must be >= 1")
        n = self.dimension
        bp = self.density.breakpoints
        edges = np.unique(np.concatenate([bp, self.velocity.breakpoints]))
        edges = edges[(edges >= bp[0]) & (edges <= bp[-1])]

        def power_int(k, lo, hi):
            return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)

        pos, masses, vels = [], [], []
        for a, b in zip(edges[:-1], edges[1:]):
            if b <= a:
                continue
            ra, rb = float(self.density(a)), float(self.density(b))
            c1 = (rb - ra) / (b - a)
            c0 = ra - c1 * a
            s1, s2 = a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0
            u1, u2 = float(self.velocity(s1)), float(self.velocity(s2))
            a1 = (u2 - u1) / (s2 - s1)
            a0 = u1 - a1 * s1
            sub = np.linspace(a, b, n_quad + 1)
            lo, hi = sub[:-1], sub[1:]
            w = c0 * power_int(n - 1, lo, hi) + c1 * power_int(n, lo, hi)
            first = c0 * power_int(n, lo, hi) + c1 * power_int(n + 1, lo, hi)
            mom = (a0 * c0 * power_int(n - 1, lo, hi)
                   + (a0 * c1 + a1 * c0) * power_int(n, lo, hi)
                   + a1 * c1 * power_int(n + 1, lo, hi))
            keep = w > 0
            pos.append(first[keep] / w[keep])
            masses.append(w[keep])
            vels.append(mom[keep] / w[keep])
        x = np.concatenate(pos) if pos else np.empty(0)
        m = np.concatenate(masses) if masses else np.empty(0)
        u = np.concatenate(vels) if vels else np.empty(0)
        if x.size == 0:
            raise DataFormatError("weighted density carries no mass")
        e = np.cumsum(m) - 0.5 * m
        return ParticleSystem(x, m, u, e, np.zeros(x.size, dtype=bool))


def reduce_radial(data: RadialData) -> ReducedMeasure:
    """Reduce radial data to the weighted 1D measure with the origin field rule."""
    return ReducedMeasure(int(data.dimension), data.density, data.velocity)


@dataclass(frozen=True)
class RadialSlice:
    """Radial solution at fixed t on the grid r."""

    t: float
    dimension: int
    r: np.ndarray
    y: np.ndarray
    R: np.ndarray
    M: np.ndarray
    varsigma: np.ndarray
    m_varsigma: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    atoms: tuple[SliceAtom, ...]
    min_recovery_radius: float
    total_weighted_mass: float


def solve_radial(data: RadialData, kappa: float, t: float, r_grid,
                 n_quad: int = 1000) -> RadialSlice:
    """Run the variational solver on the reduced data and recover radial fields."""
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid < 0):
        raise ValueError("r_grid must lie in [0, inf)")
    reduced = reduce_radial(data)
    tables = build_tables(reduced.discretize(n_quad), kappa)
    slc = evaluate_slice(tables, t, r_grid)
    fs = differentiate(slc)

    n = data.dimension
    if n == 1:
        r_min = 0.0
        rho = fs.rho.copy()
    else:
        r_min = MIN_RECOVERY_RADIUS_REL * float(r_grid[-1]) if r_grid.size else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            weight = np.where(r_grid > r_min, r_grid ** (n - 1), np.nan)
            rho = fs.rho / weight
    return RadialSlice(
        t=float(t), dimension=n, r=r_grid, y=slc.y, R=slc.R, M=slc.M,
        varsigma=fs.rho, m_varsigma=fs.mom, w=fs.u, rho=rho, atoms=slc.atoms,
        min_recovery_radius=r_min, total_weighted_mass=tables.total_mass)
