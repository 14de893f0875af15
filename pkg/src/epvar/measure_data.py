"""Measure-valued initial data: Dirac atoms plus a piecewise-linear density.

The initial state of the gas is a pair (rho0, u0) where rho0 is a finite
nonnegative measure (point masses plus an absolutely continuous part with
compact support) and u0 is a piecewise-continuous velocity.  Everything
downstream works on a canonical discretization: a sorted list of weighted
particles, each carrying the value of the initial cumulative field assigned
by the average rule

    E0(s) = ( integral_{-inf}^{s-} rho0 + integral_{-inf}^{s+} rho0 ) / 2,

i.e. an atom of mass m sees the mass strictly to its left plus m/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "DataFormatError",
    "DiracAtom",
    "PiecewiseDensity",
    "VelocityProfile",
    "MeasureData1D",
    "ParticleSystem",
    "normalize",
    "initial_field",
    "discretize",
    "parse_initial_data",
    "load_initial_data",
]

# Atoms closer than this (absolute) are merged during normalization.
ATOM_MERGE_TOL = 1e-14


class DataFormatError(ValueError):
    """Raised for malformed initial-data files or inconsistent data."""


@dataclass(frozen=True)
class DiracAtom:
    position: float
    mass: float
    velocity: float


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataFormatError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PiecewiseDensity:
    """Nonnegative density, linear between breakpoints and zero outside."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _as_float_array(self.breakpoints, "density breakpoints")
        vals = _as_float_array(self.values, "density values")
        if bp.size != vals.size:
            raise DataFormatError("density breakpoints and values differ in length")
        if bp.size == 1:
            raise DataFormatError("density needs at least two breakpoints (or none)")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise DataFormatError("density breakpoints must be strictly increasing")
        if np.any(vals < 0):
            raise DataFormatError("density values must be nonnegative")
        bp.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def is_empty(self) -> bool:
        return self.breakpoints.size == 0 or not np.any(self.values > 0)

    def __call__(self, s) -> np.ndarray:
        if self.breakpoints.size == 0:
            return np.zeros_like(np.asarray(s, dtype=float))
        out = np.interp(s, self.breakpoints, self.values, left=0.0, right=0.0)
        return out

    def total_mass(self) -> float:
        if self.breakpoints.size == 0:
            return 0.0
        return float(np.trapezoid(self.values, self.breakpoints))

    def cumulative(self, s) -> np.ndarray:
        """Exact integral of the density over (-inf, s], vectorized in s."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if self.breakpoints.size == 0:
            res = np.zeros_like(s_arr)
        else:
            bp, vals = self.breakpoints, self.values
            piece_mass = 0.5 * (vals[1:] + vals[:-1]) * np.diff(bp)
            cum = np.concatenate(([0.0], np.cumsum(piece_mass)))
            idx = np.clip(np.searchsorted(bp, s_arr, side="right") - 1, 0, bp.size - 2)
            a = bp[idx]
            slope = (vals[idx + 1] - vals[idx]) / (bp[idx + 1] - bp[idx])
            ds = np.clip(s_arr - a, 0.0, bp[idx + 1] - a)
            partial = vals[idx] * ds + 0.5 * slope * ds * ds
            res = cum[idx] + partial
            res = np.where(s_arr <= bp[0], 0.0, res)
            res = np.where(s_arr >= bp[-1], cum[-1], res)
        if np.isscalar(s) or np.ndim(s) == 0:
            return float(res[0])
        return res

    def support(self) -> tuple[float, float] | None:
        """Hull of the set where the density is positive, or None."""
        if self.is_empty:
            return None
        pos = np.flatnonzero(self.values > 0)
        lo = self.breakpoints[max(pos[0] - 1, 0)]
        hi = self.breakpoints[min(pos[-1] + 1, self.breakpoints.size - 1)]
        return float(lo), float(hi)

    @staticmethod
    def empty() -> "PiecewiseDensity":
        return PiecewiseDensity(np.empty(0), np.empty(0))


@dataclass(frozen=True)
class VelocityProfile:
    """Piecewise-linear velocity with one-sided limits at each breakpoint."""

    breakpoints: np.ndarray
    left_values: np.ndarray
    right_values: np.ndarray

    def __post_init__(self):
        bp = _as_float_array(self.breakpoints, "velocity breakpoints")
        lv = _as_float_array(self.left_values, "velocity left values")
        rv = _as_float_array(self.right_values, "velocity right values")
        if not (bp.size == lv.size == rv.size):
            raise DataFormatError("velocity arrays differ in length")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise DataFormatError("velocity breakpoints must be strictly increasing")
        for arr in (bp, lv, rv):
            arr.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "left_values", lv)
        object.__setattr__(self, "right_values", rv)

    @property
    def is_empty(self) -> bool:
        return self.breakpoints.size == 0

    def __call__(self, s) -> np.ndarray:
        """Evaluate u0; at an exact breakpoint the midpoint of the limits."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if self.breakpoints.size == 0:
            raise DataFormatError("velocity profile is empty")
        bp, lv, rv = self.breakpoints, self.left_values, self.right_values
        if bp.size == 1:
            out = np.full_like(s_arr, 0.5 * (lv[0] + rv[0]))
        else:
            idx = np.clip(np.searchsorted(bp, s_arr, side="right") - 1, 0, bp.size - 2)
            a, b = bp[idx], bp[idx + 1]
            ua, ub = rv[idx], lv[idx + 1]
            lam = np.clip((s_arr - a) / (b - a), 0.0, 1.0)
            out = ua + lam * (ub - ua)
            out = np.where(s_arr < bp[0], rv[0] + 0.0 * s_arr, out)
            out = np.where(s_arr > bp[-1], lv[-1] + 0.0 * s_arr, out)
            exact = s_arr[:, None] == bp[None, :]
            if exact.any():
                hit = exact.argmax(axis=1)
                mid = 0.5 * (lv[hit] + rv[hit])
                out = np.where(exact.any(axis=1), mid, out)
        if np.isscalar(s) or np.ndim(s) == 0:
            return float(out[0])
        return out

    def jump_sizes(self) -> np.ndarray:
        return self.right_values - self.left_values

    def covers(self, lo: float, hi: float) -> bool:
        if self.breakpoints.size == 0:
            return False
        return self.breakpoints[0] <= lo and self.breakpoints[-1] >= hi

    @staticmethod
    def continuous(breakpoints, values) -> "VelocityProfile":
        vals = np.asarray(values, dtype=float)
        return VelocityProfile(np.asarray(breakpoints, dtype=float), vals.copy(), vals.copy())

    @staticmethod
    def empty() -> "VelocityProfile":
        return VelocityProfile(np.empty(0), np.empty(0), np.empty(0))


@dataclass(frozen=True)
class MeasureData1D:
    """Initial data (rho0, rho0*u0): atoms + ac density + velocity profile."""

    atoms: tuple[DiracAtom, ...] = ()
    ac_density: PiecewiseDensity = field(default_factory=PiecewiseDensity.empty)
    velocity: VelocityProfile = field(default_factory=VelocityProfile.empty)

    def total_mass(self) -> float:
        return sum(a.mass for a in self.atoms) + self.ac_density.total_mass()

    def atom_positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms], dtype=float)

    def atom_masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms], dtype=float)


@dataclass(frozen=True)
class ParticleSystem:
    """Canonical weighted-particle discretization of a MeasureData1D.

    ``fields`` holds the initial electric field per particle by the average
    rule over the discrete measure: cumulative mass through the particle
    minus half its own mass.  Atom-derived particles are flagged so that a
    lone particle can still be recognized as a genuine point mass.
    """

    positions: np.ndarray
    masses: np.ndarray
    velocities: np.ndarray
    fields: np.ndarray
    from_atom: np.ndarray

    def __post_init__(self):
        for name in ("positions", "masses", "velocities", "fields", "from_atom"):
            arr = getattr(self, name)
            arr.flags.writeable = False
        if np.any(np.diff(self.positions) <= 0):
            raise DataFormatError("particle positions must be strictly increasing")
        if np.any(self.masses <= 0):
            raise DataFormatError("particle masses must be positive")

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def momentum(self) -> float:
        return float(np.sum(self.masses * self.velocities))


def normalize(data: MeasureData1D) -> MeasureData1D:
    """Canonical form: atoms sorted/merged, zero masses dropped, support trimmed.

    Coincident atoms (within ATOM_MERGE_TOL) merge with momentum-weighted
    velocity.  Rejects negative masses, negative density samples and zero
    total mass.  Idempotent.
    """
    for a in data.atoms:
        if a.mass < 0:
            raise DataFormatError(f"atom at {a.position} has negative mass")
    atoms = sorted((a for a in data.atoms if a.mass > 0), key=lambda a: a.position)
    merged: list[DiracAtom] = []
    for a in atoms:
        if merged and abs(a.position - merged[-1].position) <= ATOM_MERGE_TOL:
            b = merged.pop()
            m = a.mass + b.mass
            merged.append(DiracAtom(
                position=(b.position * b.mass + a.position * a.mass) / m,
                mass=m,
                velocity=(b.mass * b.velocity + a.mass * a.velocity) / m,
            ))
        else:
            merged.append(a)

    dens = data.ac_density
    if dens.is_empty:
        dens = PiecewiseDensity.empty()
    else:
        bp, vals = dens.breakpoints, dens.values
        pos = np.flatnonzero(vals > 0)
        lo = max(pos[0] - 1, 0)
        hi = min(pos[-1] + 1, bp.size - 1)
        dens = PiecewiseDensity(bp[lo:hi + 1], vals[lo:hi + 1])

    out = MeasureData1D(tuple(merged), dens, data.velocity)
    if out.total_mass() <= 0:
        raise DataFormatError("total mass must be positive")
    supp = dens.support()
    if supp is not None and not data.velocity.covers(*supp):
        raise DataFormatError(
            "velocity profile does not cover the density support "
            f"[{supp[0]}, {supp[1]}]")
    return out


def initial_field(data: MeasureData1D, s) -> np.ndarray:
    """Initial field E0(s) by the average rule; vectorized over s.

    At continuity points this is the plain cumulative integral; at an atom
    the value is the left cumulative plus half the atom mass.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.asarray(data.ac_density.cumulative(s_arr), dtype=float).copy()
    for a in data.atoms:
        out += a.mass * np.where(
            s_arr > a.position, 1.0, np.where(s_arr == a.position, 0.5, 0.0))
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(out[0])
    return out


def _quadrature_cells(dens: PiecewiseDensity, vel: VelocityProfile,
                      cuts: np.ndarray, n_quad: int):
    """Cells per density piece, pieces split at the given cuts.

    Each cell becomes the particle that carries the cell's exact mass at the
    cell's centre of mass with the mass-averaged velocity (that particle's
    parabola is exactly the cell's centre-of-mass trajectory), so total mass,
    momentum and first moment are all preserved exactly.  Pieces are split
    at atom positions and velocity breakpoints, hence both profiles are
    linear on every cell and Simpson quadrature below is exact.
    """
    bp, vals = dens.breakpoints, dens.values
    edges = np.unique(np.concatenate([bp, cuts, vel.breakpoints]))
    edges = edges[(edges >= bp[0]) & (edges <= bp[-1])]
    pos, masses, vels = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        sub = np.linspace(a, b, n_quad + 1)
        p, q = sub[:-1], sub[1:]
        mid = 0.5 * (p + q)
        h = q - p
        rho_p, rho_m, rho_q = dens(p), dens(mid), dens(q)
        # u is linear inside (a, b); extrapolate from interior points so
        # one-sided limits at jump breakpoints never leak in.
        s1 = a + (b - a) / 3.0
        s2 = a + 2.0 * (b - a) / 3.0
        u1, u2 = float(vel(s1)), float(vel(s2))
        slope = (u2 - u1) / (s2 - s1)
        u_at = lambda s: u1 + slope * (s - s1)
        w = 0.5 * (rho_p + rho_q) * h
        first = h / 6.0 * (p * rho_p + 4.0 * mid * rho_m + q * rho_q)
        mom = h / 6.0 * (u_at(p) * rho_p + 4.0 * u_at(mid) * rho_m + u_at(q) * rho_q)
        keep = w > 0
        pos.append(first[keep] / w[keep])
        masses.append(w[keep])
        vels.append(mom[keep] / w[keep])
    if not pos:
        return np.empty(0), np.empty(0), np.empty(0)
    return np.concatenate(pos), np.concatenate(masses), np.concatenate(vels)


def discretize(data: MeasureData1D, n_quad: int) -> ParticleSystem:
    """Sample the measure onto weighted particles.

    The ac part gets n_quad cells per density piece; each cell contributes
    its exact mass at its centre of mass with its mass-averaged velocity.
    Atoms are carried verbatim.  Fields are assigned by the average rule
    over the resulting discrete measure.
    """
    if n_quad < 1:
        raise ValueError("n_quad must be >= 1")
    atom_x = data.atom_positions()
    atom_m = data.atom_masses()
    atom_u = np.array([a.velocity for a in data.atoms], dtype=float)

    if not data.ac_density.is_empty:
        qx, qm, qu = _quadrature_cells(data.ac_density, data.velocity,
                                       atom_x, n_quad)
    else:
        qx = qm = qu = np.empty(0)

    x = np.concatenate([atom_x, qx])
    m = np.concatenate([atom_m, qm])
    u = np.concatenate([atom_u, qu])
    flag = np.concatenate([np.ones(atom_x.size, bool), np.zeros(qx.size, bool)])

    order = np.argsort(x, kind="stable")
    x, m, u, flag = x[order], m[order], u[order], flag[order]

    # Coincident particles (atom exactly at a cell midpoint) merge.
    if x.size > 1 and np.any(np.diff(x) <= 0):
        keep_x, keep_m, keep_u, keep_f = [x[0]], [m[0]], [m[0] * u[0]], [flag[0]]
        for i in range(1, x.size):
            if x[i] - keep_x[-1] <= 0:
                keep_m[-1] += m[i]
                keep_u[-1] += m[i] * u[i]
                keep_f[-1] = keep_f[-1] or flag[i]
            else:
                keep_x.append(x[i])
                keep_m.append(m[i])
                keep_u.append(m[i] * u[i])
                keep_f.append(flag[i])
        x = np.array(keep_x)
        m = np.array(keep_m)
        u = np.array(keep_u) / m
        flag = np.array(keep_f, dtype=bool)

    e = np.cumsum(m) - 0.5 * m
    return ParticleSystem(x, m, u, e, flag)


def parse_initial_data(text: str) -> MeasureData1D:
    """Parse the line-oriented initial-data format.

    ``atom <x> <mass> <u>`` lines anywhere; a ``density`` line starts a
    section of ``<x> <rho>`` pairs; a ``velocity`` line starts a section of
    ``<x> <u>`` or ``<x> <u_left> <u_right>`` rows.  ``#`` starts a comment.
    Unsorted breakpoints are rejected.
    """
    atoms: list[DiracAtom] = []
    dens_rows: list[tuple[float, float]] = []
    vel_rows: list[tuple[float, float, float]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0].lower()
        if head == "atom":
            if len(parts) != 4:
                raise DataFormatError(f"line {lineno}: atom needs <x> <mass> <u>")
            try:
                xv, mv, uv = (float(p) for p in parts[1:])
            except ValueError:
                raise DataFormatError(f"line {lineno}: malformed number") from None
            atoms.append(DiracAtom(xv, mv, uv))
            continue
        if head == "density":
            section = "density"
            continue
        if head == "velocity":
            section = "velocity"
            continue
        if section is None:
            raise DataFormatError(f"line {lineno}: data row outside any section")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise DataFormatError(f"line {lineno}: malformed number") from None
        if section == "density":
            if len(nums) != 2:
                raise DataFormatError(f"line {lineno}: density row needs <x> <rho>")
            if dens_rows and nums[0] <= dens_rows[-1][0]:
                raise DataFormatError(f"line {lineno}: density breakpoints not increasing")
            dens_rows.append((nums[0], nums[1]))
        else:
            if len(nums) == 2:
                nums.append(nums[1])
            if len(nums) != 3:
                raise DataFormatError(
                    f"line {lineno}: velocity row needs <x> <u_left> [u_right]")
            if vel_rows and nums[0] <= vel_rows[-1][0]:
                raise DataFormatError(f"line {lineno}: velocity breakpoints not increasing")
            vel_rows.append((nums[0], nums[1], nums[2]))

    dens = (PiecewiseDensity(np.array([r[0] for r in dens_rows]),
                             np.array([r[1] for r in dens_rows]))
            if dens_rows else PiecewiseDensity.empty())
    vel = (VelocityProfile(np.array([r[0] for r in vel_rows]),
                           np.array([r[1] for r in vel_rows]),
                           np.array([r[2] for r in vel_rows]))
           if vel_rows else VelocityProfile.empty())
    return normalize(MeasureData1D(tuple(atoms), dens, vel))


def load_initial_data(path) -> MeasureData1D:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_initial_data(fh.read())
