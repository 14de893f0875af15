"""Event-driven sticky-particle simulator.

Particles fly on exact parabolas between events; adjacent pairs collide at
roots of a quadratic in time, and colliding groups merge conserving mass
and momentum.  Fields follow the average rule (mass strictly left plus half
the own mass), so the total momentum obeys P(t) = P0 + (kappa/2) M^2 t
exactly and the centre of mass of any merged group stays on its parabola.

Particles never split here.  For kappa <= 0 this reproduces the variational
solution; for kappa > 0 it is the contrasting model (the variational weak
solution may split a shock, the sticky one keeps it).
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .measure_data import MeasureData1D, ParticleSystem, discretize

__all__ = [
    "StickyParticle",
    "StickyState",
    "MergeEvent",
    "collision_time",
    "step_to_next_event",
    "run",
    "simulate",
    "mass_profile",
    "momentum_profile",
    "export_trajectories",
]

SIMULTANEITY_TOL = 1e-12   # events closer than this merge as one group


class StickyParticle(NamedTuple):
    position: float
    mass: float
    velocity: float
    field: float


class MergeEvent(NamedTuple):
    time: float
    position: float
    mass: float
    velocity: float


@dataclass(frozen=True)
class StickyState:
    """Snapshot of the simulator: sorted particles plus candidate event times."""

    t: float
    kappa: float
    ids: np.ndarray
    x: np.ndarray
    m: np.ndarray
    u: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        # Strict increase holds between events; allow exact coincidence (a
        # collision instant) and fp-level dust, which merging cleans up.
        if self.x.size > 1:
            scale = max(1.0, float(np.max(np.abs(self.x))))
            if np.any(np.diff(self.x) < -1e-11 * scale):
                raise ValueError("sticky particle positions out of order")

    @property
    def size(self) -> int:
        return int(self.x.size)

    def particle(self, i: int) -> StickyParticle:
        return StickyParticle(float(self.x[i]), float(self.m[i]),
                              float(self.u[i]), float(self.e[i]))

    def event_queue(self) -> np.ndarray:
        """Candidate absolute collision times for each adjacent pair (nan = none)."""
        dt = _pair_collision_dts(self.x, self.u, self.e, self.kappa)
        return self.t + dt

    def advanced(self, t: float) -> "StickyState":
        """Free flight to time t >= self.t (no events crossed)."""
        dt = t - self.t
        x = self.x + self.u * dt + 0.5 * self.kappa * self.e * dt * dt
        u = self.u + self.kappa * self.e * dt
        return StickyState(t=float(t), kappa=self.kappa, ids=self.ids,
                           x=x, m=self.m, u=u, e=self.e)


def _smallest_positive_roots(a, b, c, tol: float = 0.0) -> np.ndarray:
    """Vectorized smallest root > tol of a t^2 + b t + c = 0 (nan if none)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    out = np.full(a.shape, np.nan)

    lin = a == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lin = np.where(b != 0.0, -c / b, np.nan)
    out[lin & (t_lin > tol)] = t_lin[lin & (t_lin > tol)]

    quad = ~lin
    disc = b * b - 4.0 * a * c
    ok = quad & (disc >= 0.0)
    if np.any(ok):
        sq = np.sqrt(np.where(ok, disc, 0.0))
        # Stable pairing: q = -(b + sign(b) sqrt(disc)) / 2, roots q/a and c/q.
        sgn = np.where(b >= 0.0, 1.0, -1.0)
        q = -0.5 * (b + sgn * sq)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(ok, q / a, np.nan)
            r2 = np.where(ok & (q != 0.0), c / q, np.nan)
        r1 = np.where(r1 > tol, r1, np.inf)
        r2 = np.where(r2 > tol, r2, np.inf)
        best = np.minimum(r1, r2)
        sel = ok & np.isfinite(best)
        out[sel] = best[sel]
    return out


def _pair_collision_dts(x, u, e, kappa) -> np.ndarray:
    """Time-from-now to collision for each adjacent pair (nan if never)."""
    if x.size < 2:
        return np.empty(0)
    a = 0.5 * kappa * np.diff(e)
    b = np.diff(u)
    c = np.diff(x)
    return _smallest_positive_roots(a, b, c)


def collision_time(p: StickyParticle, q: StickyParticle, kappa: float):
    """Smallest positive time until adjacent particles p (left) and q meet.

    Root of (1/2) kappa (e_q - e_p) t^2 + (u_q - u_p) t + (x_q - x_p) = 0;
    None when no positive root exists (diverging repulsive pair).
    """
    if q.position < p.position:
        raise ValueError("p must lie left of q")
    root = _smallest_positive_roots(
        np.array([0.5 * kappa * (q.field - p.field)]),
        np.array([q.velocity - p.velocity]),
        np.array([q.position - p.position]))[0]
    return None if math.isnan(root) else float(root)


def _recompute_fields(m: np.ndarray) -> np.ndarray:
    return np.cumsum(m) - 0.5 * m


def _merge_groups(state: StickyState, pair_mask: np.ndarray,
                  next_id: int) -> tuple[StickyState, list[MergeEvent], int]:
    """Merge runs of particles connected by colliding pairs."""
    n = state.size
    group = np.zeros(n, dtype=np.int64)
    g = 0
    for i in range(1, n):
        if not pair_mask[i - 1]:
            g += 1
        group[i] = g
    n_groups = g + 1
    m = np.bincount(group, weights=state.m, minlength=n_groups)
    mx = np.bincount(group, weights=state.m * state.x, minlength=n_groups)
    mu = np.bincount(group, weights=state.m * state.u, minlength=n_groups)
    x_new = mx / m
    u_new = mu / m
    sizes = np.bincount(group, minlength=n_groups)

    ids = np.empty(n_groups, dtype=np.int64)
    events: list[MergeEvent] = []
    first = np.searchsorted(group, np.arange(n_groups), side="left")
    for gi in range(n_groups):
        if sizes[gi] == 1:
            ids[gi] = state.ids[first[gi]]
        else:
            ids[gi] = next_id
            next_id += 1
            events.append(MergeEvent(state.t, float(x_new[gi]),
                                     float(m[gi]), float(u_new[gi])))
    new_state = StickyState(t=state.t, kappa=state.kappa, ids=ids,
                            x=x_new, m=m, u=u_new, e=_recompute_fields(m))
    return new_state, events, next_id


def _coincidence_mask(state: StickyState) -> np.ndarray:
    if state.size < 2:
        return np.zeros(0, dtype=bool)
    scale = max(1.0, float(np.max(np.abs(state.x))))
    return np.diff(state.x) <= 1e-13 * scale


def step_to_next_event(state: StickyState) -> StickyState:
    """Advance to the earliest collision and merge the colliding group(s).

    Simultaneous collisions (within SIMULTANEITY_TOL) merge together.  A
    state with no pending event is returned unchanged.
    """
    touching = _coincidence_mask(state)
    if touching.any():
        merged, _, _ = _merge_groups(state, touching, int(state.ids.max()) + 1)
        return merged
    dts = _pair_collision_dts(state.x, state.u, state.e, state.kappa)
    if dts.size == 0 or np.all(np.isnan(dts)):
        return state
    dt_min = np.nanmin(dts)
    moved = state.advanced(state.t + dt_min)
    tol = SIMULTANEITY_TOL * max(1.0, abs(moved.t))
    pair_mask = (np.nan_to_num(dts, nan=np.inf) <= dt_min + tol) | _coincidence_mask(moved)
    merged, _, _ = _merge_groups(moved, pair_mask, int(state.ids.max()) + 1)
    return merged


def simulate(state: StickyState, t_end: float,
              events: list[MergeEvent] | None = None) -> StickyState:
    """Run the event loop up to t_end, recording merge events if given a list."""
    next_id = int(state.ids.max()) + 1 if state.size else 0
    while True:
        touching = _coincidence_mask(state)
        if touching.any():
            state, evs, next_id = _merge_groups(state, touching, next_id)
            if events is not None:
                events.extend(evs)
            continue
        dts = _pair_collision_dts(state.x, state.u, state.e, state.kappa)
        if dts.size == 0 or np.all(np.isnan(dts)):
            break
        dt_min = np.nanmin(dts)
        if state.t + dt_min > t_end:
            break
        moved = state.advanced(state.t + dt_min)
        tol = SIMULTANEITY_TOL * max(1.0, abs(moved.t))
        pair_mask = (np.nan_to_num(dts, nan=np.inf) <= dt_min + tol) | _coincidence_mask(moved)
        state, evs, next_id = _merge_groups(moved, pair_mask, next_id)
        if events is not None:
            events.extend(evs)
    return state.advanced(t_end)


def initial_state(ps: ParticleSystem, kappa: float) -> StickyState:
    return StickyState(
        t=0.0, kappa=float(kappa), ids=np.arange(ps.size, dtype=np.int64),
        x=ps.positions.copy(), m=ps.masses.copy(),
        u=ps.velocities.copy(), e=ps.fields.copy())


def run(data: MeasureData1D, kappa: float, t_end: float, n_quad: int,
        snapshot_times=None, events: list[MergeEvent] | None = None
        ) -> list[StickyState]:
    """Discretize, simulate to t_end, snapshot at the requested times."""
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if snapshot_times is None:
        snapshot_times = [t_end]
    times = sorted(float(t) for t in snapshot_times)
    if times and (times[0] < 0 or times[-1] > t_end + 1e-12):
        raise ValueError("snapshot times must lie in [0, t_end]")
    state = initial_state(discretize(data, n_quad), kappa)
    snaps = []
    for t in times:
        state = simulate(state, t, events)
        snaps.append(state)
    return snaps


def mass_profile(state: StickyState, x_grid) -> np.ndarray:
    """R(x, t) = mass at positions <= x (right-continuous staircase)."""
    cum = np.concatenate(([0.0], np.cumsum(state.m)))
    return cum[np.searchsorted(state.x, np.asarray(x_grid, dtype=float), side="right")]


def momentum_profile(state: StickyState, x_grid) -> np.ndarray:
    cum = np.concatenate(([0.0], np.cumsum(state.m * state.u)))
    return cum[np.searchsorted(state.x, np.asarray(x_grid, dtype=float), side="right")]


def export_trajectories(states: list[StickyState]) -> str:
    """CSV rows (t, particle_id, x, mass, u) over the given snapshots."""
    lines = ["t,particle_id,x,mass,u"]
    for st in states:
        for i in range(st.size):
            lines.append(f"{st.t:.17g},{int(st.ids[i])},{st.x[i]:.17g},"
                         f"{st.m[i]:.17g},{st.u[i]:.17g}")
    return "\n".join(lines) + "\n"
