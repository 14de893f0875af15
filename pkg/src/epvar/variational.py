"""Variational solver: argmin of the weighted quadratic form over prefixes.

For a particle system (s_i, w_i, u_i, e_i) and forcing constant kappa the
functional to minimize in the Lagrangian label y is

    F(y) = sum_{s_j <= y} w_j * Q_{x,t}(s_j),
    Q_{x,t}(s) = s + t*u0(s) + 0.5*kappa*E0(s)*t^2 - x,

with the empty prefix contributing 0 (labels left of all mass).  At fixed t
each prefix i defines a line in x,

    Phi(i; x) = A_i + t*B_i + (kappa t^2/2) C_i - x*M_i,

so the map x -> argmin is the lower envelope of N+1 lines whose slopes -M_i
are strictly decreasing.  The envelope is computed with a single monotone
stack pass; its breakpoints are the exact jump locations of y(x, t), i.e.
the delta-shock positions, and skipped prefix indices are the labels
swallowed by shocks.

Convention for the vacuum side: when the empty prefix is the minimizer the
label is reported as -inf ("left of all mass").
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .measure_data import ParticleSystem

__all__ = [
    "PrefixTables",
    "MinimizerResult",
    "SliceAtom",
    "SolutionSlice",
    "ExclusionSet",
    "build_tables",
    "minimize",
    "lower_envelope",
    "evaluate_slice",
    "evaluate_entropy_slice",
    "shock_speed",
]

TIE_REL = 1e-11          # relative argmin tie tolerance
ATOM_MASS_REL = 1e-9     # mass jump (relative to total) that flags a delta-shock
POS_GROUP_REL = 1e-10    # envelope breakpoints closer than this collapse to one atom


@dataclass(frozen=True)
class PrefixTables:
    """Cumulative sums enabling O(1) evaluation of the functional at prefixes.

    Arrays are padded with a leading zero so that prefix k (k = -1 for the
    empty prefix) lives at padded index k + 1.
    """

    positions: np.ndarray
    masses: np.ndarray
    velocities: np.ndarray
    fields: np.ndarray
    from_atom: np.ndarray
    kappa: float
    pref_m: np.ndarray    # sum w
    pref_a: np.ndarray    # sum w*s
    pref_b: np.ndarray    # sum w*u
    pref_c: np.ndarray    # sum w*e
    pref_u2: np.ndarray   # sum w*u^2
    pref_ue: np.ndarray   # sum w*u*e
    pref_e2: np.ndarray   # sum w*e^2

    @property
    def size(self) -> int:
        return int(self.positions.size)

    @property
    def total_mass(self) -> float:
        return float(self.pref_m[-1])

    @property
    def atom_threshold(self) -> float:
        return ATOM_MASS_REL * self.total_mass

    @property
    def position_scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.positions))))

    def phi(self, x: float, t: float) -> np.ndarray:
        """Phi(i; x, t) for particle prefixes i = 0..N-1."""
        c2 = 0.5 * self.kappa * t * t
        return (self.pref_a[1:] + t * self.pref_b[1:]
                + c2 * self.pref_c[1:] - x * self.pref_m[1:])

    def q_value(self, idx, x, t):
        """Q_{x,t}(s_idx): signed offset of the parabolic arrival from x."""
        return (self.positions[idx] + t * self.velocities[idx]
                + 0.5 * self.kappa * self.fields[idx] * t * t - x)

    def arrivals(self, t: float) -> np.ndarray:
        """Free-flight positions s + t*u + (kappa/2) e t^2 of all labels."""
        return (self.positions + t * self.velocities
                + 0.5 * self.kappa * t * t * self.fields)

    def prefix_mass(self, k):
        return self.pref_m[np.asarray(k) + 1]

    def prefix_momentum(self, k, t: float):
        kp = np.asarray(k) + 1
        return self.pref_b[kp] + self.kappa * t * self.pref_c[kp]

    def prefix_wtilde(self, k, t: float):
        """sum w (u + kappa e t)^2 through prefix k."""
        kp = np.asarray(k) + 1
        kt = self.kappa * t
        return self.pref_u2[kp] + 2.0 * kt * self.pref_ue[kp] + kt * kt * self.pref_e2[kp]

    def prefix_field_integral(self, k):
        """kappa * sum w e through prefix k (the potential source term)."""
        return self.kappa * self.pref_c[np.asarray(k) + 1]


def build_tables(ps: ParticleSystem, kappa: float) -> PrefixTables:
    s, w, u, e = ps.positions, ps.masses, ps.velocities, ps.fields

    def pad(arr):
        out = np.concatenate(([0.0], np.cumsum(arr)))
        out.flags.writeable = False
        return out

    return PrefixTables(
        positions=s, masses=w, velocities=u, fields=e, from_atom=ps.from_atom,
        kappa=float(kappa),
        pref_m=pad(w), pref_a=pad(w * s), pref_b=pad(w * u), pref_c=pad(w * e),
        pref_u2=pad(w * u * u), pref_ue=pad(w * u * e), pref_e2=pad(w * e * e),
    )


@dataclass(frozen=True)
class MinimizerResult:
    k: int                  # rightmost argmin prefix index (-1 = empty prefix)
    y: float                # s_k, or -inf for the empty prefix
    y_left: float           # leftmost tied argmin position
    q_at_y: float           # Q_{x,t}(s_k); nan for the empty prefix
    functional_value: float


def minimize(tables: PrefixTables, x: float, t: float) -> MinimizerResult:
    """Exhaustive scan over prefix values, rightmost argmin within tie_tol."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi = tables.phi(x, t)
    if phi.size == 0:
        return MinimizerResult(-1, -math.inf, -math.inf, math.nan, 0.0)
    lo = min(float(phi.min()), 0.0)
    hi = max(float(phi.max()), 0.0)
    tol = TIE_REL * (hi - lo) + 1e-300
    tied = phi <= lo + tol
    if tied.any():
        k = int(phi.size - 1 - np.argmax(tied[::-1]))
        y = float(tables.positions[k])
        q = float(tables.q_value(k, x, t))
    else:
        k, y, q = -1, -math.inf, math.nan
    if 0.0 <= lo + tol:
        y_left = -math.inf
    else:
        y_left = float(tables.positions[int(np.argmax(tied))])
    return MinimizerResult(k, y, y_left, q, lo)


def lower_envelope(tables: PrefixTables, t: float, admissible: np.ndarray | None = None):
    """Realized minimizer indices and exact jump locations at time t.

    Returns (indices, breakpoints): ``indices[j]`` is the minimizer for
    x in [breakpoints[j-1], breakpoints[j]), with indices[0] (= -1 unless
    masked) valid down to -inf.  ``admissible`` optionally masks particle
    prefixes out of the candidate set (the empty prefix always remains).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi_all = tables.phi(0.0, t)   # intercepts: Phi at x = 0
    m_all = tables.pref_m[1:]
    if admissible is None:
        cand = np.arange(tables.size)
    else:
        cand = np.flatnonzero(admissible)
    phi = np.concatenate(([0.0], phi_all[cand]))
    slope = np.concatenate(([0.0], m_all[cand]))
    idx = np.concatenate(([-1], cand))

    n = phi.size
    stack = np.empty(n, dtype=np.int64)
    take = np.empty(n, dtype=float)   # x where stack[j] takes over from stack[j-1]
    stack[0] = 0
    take[0] = -math.inf
    top = 0
    for c in range(1, n):
        # line_c(x) = phi[c] - slope[c]*x beats line_i for x >= takeover(c, i)
        while top >= 0:
            i = stack[top]
            xc = (phi[c] - phi[i]) / (slope[c] - slope[i])
            if top >= 1 and xc <= take[top]:
                top -= 1      # line i never strictly realized
            else:
                break
        top += 1
        stack[top] = c
        take[top] = xc
    sel = stack[:top + 1]
    return idx[sel], take[1:top + 1]


def _group_breakpoints(indices: np.ndarray, breakpoints: np.ndarray, tol: float):
    """Chain-group envelope breakpoints closer than tol.

    Yields (x_star, i_lo, i_hi): a jump of the minimizer from prefix i_lo to
    prefix i_hi at position x_star (mass-weighted over the group's jumps).
    """
    groups = []
    j = 0
    m = breakpoints.size
    while j < m:
        k = j
        while k + 1 < m and breakpoints[k + 1] - breakpoints[j] <= tol:
            k += 1
        groups.append((j, k))
        j = k + 1
    return groups


@dataclass(frozen=True)
class SliceAtom:
    """A delta-shock: position, swallowed mass/momentum and the label window."""

    position: float
    mass: float
    momentum: float
    label_lo: float       # open interval of swallowed Lagrangian labels
    label_hi: float
    index_lo: int         # prefix indices bounding the jump
    index_hi: int
    mass_below: float     # cumulative mass strictly left of the jump

    @property
    def velocity(self) -> float:
        return self.momentum / self.mass


@dataclass(frozen=True)
class SolutionSlice:
    """The map x -> (y, R, M) at fixed t plus extracted delta-shocks.

    ``wtilde`` and ``field_integral`` are the label-space potentials used by
    the weak-form residual; ``minimizer_index`` records the prefix per grid
    point (after the one-sided-limit rule is applied to R and M).
    """

    t: float
    x: np.ndarray
    y: np.ndarray
    R: np.ndarray
    M: np.ndarray
    minimizer_index: np.ndarray
    wtilde: np.ndarray
    field_integral: np.ndarray
    atoms: tuple[SliceAtom, ...]
    total_mass: float


def _atoms_from_envelope(tables: PrefixTables, t: float, indices, breakpoints,
                         x_lo: float, x_hi: float) -> tuple[SliceAtom, ...]:
    tol = POS_GROUP_REL * tables.position_scale
    atoms = []
    for j0, j1 in _group_breakpoints(indices, breakpoints, tol):
        i_lo, i_hi = int(indices[j0]), int(indices[j1 + 1])
        jump_mass = float(tables.prefix_mass(i_hi) - tables.prefix_mass(i_lo))
        if jump_mass <= tables.atom_threshold:
            continue
        multi = (i_hi - i_lo) >= 2
        atomic = bool(np.any(tables.from_atom[i_lo + 1:i_hi + 1]))
        if not (multi or atomic):
            continue
        # Position: mass-weighted mean of the group's jump locations.
        seg_idx = indices[j0:j1 + 2]
        seg_mass = tables.prefix_mass(seg_idx[1:]) - tables.prefix_mass(seg_idx[:-1])
        z = float(np.sum(breakpoints[j0:j1 + 1] * seg_mass) / np.sum(seg_mass))
        if not (x_lo <= z <= x_hi):
            continue
        mom = float(tables.prefix_momentum(i_hi, t) - tables.prefix_momentum(i_lo, t))
        lab_lo = float(tables.positions[i_lo]) if i_lo >= 0 else -math.inf
        atoms.append(SliceAtom(
            position=z, mass=jump_mass, momentum=mom,
            label_lo=lab_lo, label_hi=float(tables.positions[i_hi]),
            index_lo=i_lo, index_hi=i_hi,
            mass_below=float(tables.prefix_mass(i_lo))))
    return tuple(atoms)


def _slice_from_envelope(tables: PrefixTables, t: float, x_grid: np.ndarray,
                         indices, breakpoints) -> SolutionSlice:
    arc = np.searchsorted(breakpoints, x_grid, side="right")
    k = indices[arc]

    # One-sided limit rule: use the strict left prefix where Q at the
    # minimizer is positive (ties at Q = 0 take the inclusive branch).
    q_slack = TIE_REL * tables.position_scale
    k_eff = k.copy()
    mask = k >= 0
    if mask.any():
        q = tables.q_value(k[mask], x_grid[mask], t)
        dec = np.zeros(k.shape, dtype=bool)
        dec[mask] = q > q_slack
        k_eff[dec] -= 1

    y = np.where(k >= 0, tables.positions[np.clip(k, 0, None)], -math.inf)
    slice_atoms = _atoms_from_envelope(
        tables, t, indices, breakpoints, float(x_grid[0]), float(x_grid[-1]))
    return SolutionSlice(
        t=t, x=x_grid, y=y,
        R=tables.prefix_mass(k_eff),
        M=tables.prefix_momentum(k_eff, t),
        minimizer_index=k_eff,
        wtilde=tables.prefix_wtilde(k_eff, t),
        field_integral=tables.prefix_field_integral(k_eff),
        atoms=slice_atoms,
        total_mass=tables.total_mass,
    )


def evaluate_slice(tables: PrefixTables, t: float, x_grid) -> SolutionSlice:
    """Evaluate y, R, M on a sorted grid and extract delta-shocks at time t."""
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim != 1 or x_grid.size < 1:
        raise ValueError("x_grid must be a one-dimensional array")
    if np.any(np.diff(x_grid) < 0):
        raise ValueError("x_grid must be sorted")
    indices, breakpoints = lower_envelope(tables, t)
    return _slice_from_envelope(tables, t, x_grid, indices, breakpoints)


@dataclass(frozen=True)
class ExclusionSet:
    """Open label intervals swallowed by shocks up to ``time`` (sorted, disjoint)."""

    time: float = 0.0
    intervals: tuple[tuple[float, float], ...] = ()

    def add(self, new: list[tuple[float, float]], time: float) -> "ExclusionSet":
        if not new:
            return ExclusionSet(time, self.intervals)
        merged = sorted(list(self.intervals) + list(new))
        out = [merged[0]]
        for lo, hi in merged[1:]:
            plo, phi_ = out[-1]
            # Open intervals: merge only on strict overlap.  Touching
            # intervals share a realized edge label that stays admissible.
            if lo < phi_:
                out[-1] = (plo, max(phi_, hi))
            elif lo == phi_ and hi <= phi_:
                continue
            else:
                out.append((lo, hi))
        return ExclusionSet(time, tuple(out))

    def admissible(self, tables: PrefixTables) -> np.ndarray:
        """Mask of particle labels not strictly inside any excluded interval."""
        mask = np.ones(tables.size, dtype=bool)
        s = tables.positions
        for lo, hi in self.intervals:
            mask &= ~((s > lo) & (s < hi))
        return mask


def evaluate_entropy_slice(tables: PrefixTables, t: float, x_grid,
                           history: ExclusionSet | None = None,
                           dt: float | None = None):
    """History-forgetting variant: minimize over labels outside the exclusion set.

    Advances from ``history.time`` to ``t`` in steps of ``dt``; at each step
    every jump's open label interval joins the exclusion set, so particles
    swallowed by a shock can never minimize again.  For kappa <= 0 the
    result coincides with evaluate_slice.  Returns (slice, updated history).
    """
    x_grid = np.asarray(x_grid, dtype=float)
    if history is None:
        history = ExclusionSet()
    if t < history.time:
        raise ValueError("t must not precede the history time")
    if dt is None:
        dt = 1e-3 * max(t, 1e-12)
    if dt <= 0:
        raise ValueError("dt must be positive")

    n_steps = max(1, int(math.ceil((t - history.time) / dt - 1e-12)))
    times = history.time + (t - history.time) * np.arange(1, n_steps + 1) / n_steps
    tol = POS_GROUP_REL * tables.position_scale

    indices = breakpoints = None
    for tau in times:
        adm = history.admissible(tables)
        indices, breakpoints = lower_envelope(tables, tau, adm)
        new_intervals = []
        for j0, j1 in _group_breakpoints(indices, breakpoints, tol):
            i_lo, i_hi = int(indices[j0]), int(indices[j1 + 1])
            if i_hi - i_lo >= 2:
                lab_lo = float(tables.positions[i_lo]) if i_lo >= 0 else -math.inf
                new_intervals.append((lab_lo, float(tables.positions[i_hi])))
        # Consecutive realized indices with a gap of one skip no labels; the
        # open interval between neighbouring particles is empty.
        history = history.add(new_intervals, float(tau))

    result = _slice_from_envelope(tables, t, x_grid, indices, breakpoints)
    return result, history


def shock_speed(tables: PrefixTables, z: float, t: float) -> float:
    """Propagation speed of the jump at z: swallowed momentum over mass."""
    indices, breakpoints = lower_envelope(tables, t)
    tol = POS_GROUP_REL * tables.position_scale
    match_tol = 1e-6 * tables.position_scale
    best = None
    for j0, j1 in _group_breakpoints(indices, breakpoints, tol):
        i_lo, i_hi = int(indices[j0]), int(indices[j1 + 1])
        jump_mass = float(tables.prefix_mass(i_hi) - tables.prefix_mass(i_lo))
        if jump_mass <= tables.atom_threshold:
            continue
        seg_idx = indices[j0:j1 + 2]
        seg_mass = tables.prefix_mass(seg_idx[1:]) - tables.prefix_mass(seg_idx[:-1])
        pos = float(np.sum(breakpoints[j0:j1 + 1] * seg_mass) / np.sum(seg_mass))
        dist = abs(pos - z)
        if dist <= match_tol and (best is None or dist < best[0]):
            mom = float(tables.prefix_momentum(i_hi, t) - tables.prefix_momentum(i_lo, t))
            best = (dist, mom / jump_mass)
    if best is None:
        raise ValueError(f"no jump of mass above the atom threshold at x = {z}")
    return best[1]
