"""Closed-form smooth-regime solver along parabolic particle paths.

Before characteristics cross, each label alpha travels on

    x(alpha, t) = alpha + u0(alpha) t + (kappa/2) E0(alpha) t^2,
    u(alpha, t) = u0(alpha) + kappa E0(alpha) t,

and the density follows rho = rho0 / Gamma with the path Jacobian

    Gamma(alpha, t) = 1 + u0'(alpha) t + (kappa/2) rho0(alpha) t^2.

Smoothness is lost at the first positive root of Gamma over all labels and,
for repulsive forcing, recovered after the last such root.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .measure_data import MeasureData1D

__all__ = ["CharacteristicFan", "evolve_smooth", "critical_times", "center_of_mass"]


@dataclass(frozen=True)
class CharacteristicFan:
    """Label sample of the smooth solution; arrays evaluated at time t."""

    labels: np.ndarray
    u0: np.ndarray
    du0: np.ndarray
    rho0: np.ndarray
    e0: np.ndarray
    kappa: float
    t: float
    x: np.ndarray
    u: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray

    def position_at(self, t: float) -> np.ndarray:
        return self.labels + self.u0 * t + 0.5 * self.kappa * self.e0 * t * t

    def velocity_at(self, t: float) -> np.ndarray:
        return self.u0 + self.kappa * self.e0 * t

    def gamma_at(self, t: float) -> np.ndarray:
        return 1.0 + self.du0 * t + 0.5 * self.kappa * self.rho0 * t * t

    def density_at(self, t: float) -> np.ndarray:
        return self.rho0 / self.gamma_at(t)


def _require_smooth(data: MeasureData1D) -> None:
    if data.atoms:
        raise ValueError("characteristic solver requires atom-free data")
    if data.ac_density.is_empty:
        raise ValueError("characteristic solver requires an ac density")
    if data.velocity.is_empty:
        raise ValueError("characteristic solver requires a velocity profile")
    jumps = data.velocity.jump_sizes()
    if np.any(jumps != 0.0):
        raise ValueError("velocity profile must be continuous (no jumps)")


def _combined_pieces(data: MeasureData1D):
    """Sub-intervals of the density support hull on which both profiles are linear."""
    lo, hi = data.ac_density.support()
    cuts = np.unique(np.concatenate([
        data.ac_density.breakpoints, data.velocity.breakpoints]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    cuts = np.unique(np.concatenate([[lo], cuts, [hi]]))
    return list(zip(cuts[:-1], cuts[1:]))


def _piece_slope(vel, a: float, b: float) -> float:
    return (vel(b) - vel(a)) / (b - a)


def evolve_smooth(data: MeasureData1D, kappa: float, t: float,
                  labels=None, n_labels: int = 512) -> CharacteristicFan:
    """Exact fan at time t < t_c1 for atom-free data.

    Labels default to a per-piece sample (internal breakpoints appear once
    per adjacent piece so the one-sided derivative is kept on either side).
    """
    _require_smooth(data)
    if t < 0:
        raise ValueError("t must be nonnegative")
    tc1, _ = critical_times(data, kappa)
    if t >= tc1:
        raise ValueError(f"smooth solution breaks down at t_c1 = {tc1}; got t = {t}")

    pieces = _combined_pieces(data)
    total_len = sum(b - a for a, b in pieces)
    lab_list, du_list = [], []
    if labels is not None:
        labels = np.asarray(labels, dtype=float)
        lo, hi = data.ac_density.support()
        if np.any((labels < lo) | (labels > hi)):
            raise ValueError("labels must lie inside the density support hull")
        for a, b in pieces:
            sel = labels[(labels >= a) & (labels <= b)]
            lab_list.append(sel)
            du_list.append(np.full(sel.size, _piece_slope(data.velocity, a, b)))
    else:
        for a, b in pieces:
            m = max(2, int(round(n_labels * (b - a) / total_len)))
            sel = np.linspace(a, b, m)
            lab_list.append(sel)
            du_list.append(np.full(m, _piece_slope(data.velocity, a, b)))
    lab = np.concatenate(lab_list)
    du0 = np.concatenate(du_list)
    u0 = np.asarray(data.velocity(lab), dtype=float)
    rho0 = np.asarray(data.ac_density(lab), dtype=float)
    e0 = np.asarray(data.ac_density.cumulative(lab), dtype=float)

    gamma = 1.0 + du0 * t + 0.5 * kappa * rho0 * t * t
    return CharacteristicFan(
        labels=lab, u0=u0, du0=du0, rho0=rho0, e0=e0, kappa=float(kappa), t=float(t),
        x=lab + u0 * t + 0.5 * kappa * e0 * t * t,
        u=u0 + kappa * e0 * t,
        gamma=gamma,
        rho=rho0 / gamma,
    )


def _gamma_roots(du: float, rho: float, kappa: float):
    """Positive roots of 1 + du*t + (kappa/2) rho t^2, sorted; may be empty."""
    a = 0.5 * kappa * rho
    if a == 0.0:
        if du < 0:
            return [-1.0 / du]
        return []
    disc = du * du - 4.0 * a
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    r1 = (-du - sq) / (2.0 * a)
    r2 = (-du + sq) / (2.0 * a)
    return sorted(r for r in (r1, r2) if r > 0)


def critical_times(data: MeasureData1D, kappa: float) -> tuple[float, float]:
    """First loss (t_c1) and, for kappa > 0, recovery (t_c2) of smoothness.

    Per linear piece the Jacobian extremes sit at the endpoints (the
    quadratic is monotone in rho0), so endpoint roots are exact.  Returns
    (inf, inf) for sub-critical data.
    """
    _require_smooth(data)
    tc1 = math.inf
    tc2_candidate = 0.0
    any_root = False
    recovers = True
    for a, b in _combined_pieces(data):
        du = _piece_slope(data.velocity, a, b)
        for rho in (float(data.ac_density(a)), float(data.ac_density(b))):
            roots = _gamma_roots(du, rho, kappa)
            if roots:
                any_root = True
                tc1 = min(tc1, roots[0])
                tc2_candidate = max(tc2_candidate, roots[-1])
                if rho == 0.0:
                    recovers = False   # linear Gamma stays nonpositive
    if not any_root:
        return math.inf, math.inf
    if kappa > 0 and recovers:
        return tc1, tc2_candidate
    return tc1, math.inf


def center_of_mass(data: MeasureData1D, kappa: float, a: float, b: float,
                   t: float) -> float:
    """Parabola followed by the centre of mass of labels in [a, b].

    X(t) = X0 + U0 t + (kappa/2) Ehat t^2 with Ehat the average of the
    cumulative mass just left of a and just right of b; valid through any
    collisions inside the interval.
    """
    if b < a:
        raise ValueError("interval must satisfy a <= b")
    dens, vel = data.ac_density, data.velocity

    mass = 0.0
    first_moment = 0.0
    momentum = 0.0
    if not dens.is_empty:
        lo, hi = dens.support()
        aa, bb = max(a, lo), min(b, hi)
        if bb > aa:
            cuts = np.unique(np.concatenate([
                [aa, bb],
                dens.breakpoints[(dens.breakpoints > aa) & (dens.breakpoints < bb)],
                vel.breakpoints[(vel.breakpoints > aa) & (vel.breakpoints < bb)],
            ]))
            for p, q in zip(cuts[:-1], cuts[1:]):
                mid = 0.5 * (p + q)
                h = q - p
                rp, rm, rq = float(dens(p)), float(dens(mid)), float(dens(q))
                mass += 0.5 * (rp + rq) * h
                # Simpson is exact for the quadratic integrands below.
                first_moment += h / 6.0 * (p * rp + 4.0 * mid * rm + q * rq)
                up, um, uq = float(vel(p)), float(vel(mid)), float(vel(q))
                momentum += h / 6.0 * (up * rp + 4.0 * um * rm + uq * rq)
    for atom in data.atoms:
        if a <= atom.position <= b:
            mass += atom.mass
            first_moment += atom.mass * atom.position
            momentum += atom.mass * atom.velocity
    if mass <= 0:
        raise ValueError("interval [a, b] carries no mass")

    cum_left = float(dens.cumulative(a)) + sum(
        at.mass for at in data.atoms if at.position < a)
    cum_right = float(dens.cumulative(b)) + sum(
        at.mass for at in data.atoms if at.position <= b)
    e_hat = 0.5 * (cum_left + cum_right)
    x0 = first_moment / mass
    u0 = momentum / mass
    return x0 + u0 * t + 0.5 * kappa * e_hat * t * t
