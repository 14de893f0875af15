"""Physical fields from the potentials (R, M) and weak-form residuals.

The measure density splits into an ac part, recovered by finite differences
of R between the delta-shocks, and the shocks themselves, carried over with
velocity = momentum / mass.  The electric field at time t is the cumulative
mass with the average rule at atoms.

The weak-form validator integrates the two residuals

    r_mass = integral( R phi_xt + M phi_xx )
    r_mom  = integral( M phi_xt + (W - Z) phi_xx )

against a compactly supported bump phi, where W is the label-space kinetic
potential sum w (u + kappa e t)^2 through the minimizer prefix and Z_x is
the field source kappa * sum w e (anchored at the left edge of the grid;
the anchor drops out for compactly supported test functions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .variational import SliceAtom, SolutionSlice

__all__ = ["FieldSlice", "differentiate", "BumpTestFunction", "weak_residual"]

# ac velocity is reported only where the density exceeds this fraction of
# (total mass / domain length); elsewhere it is nan (vacuum).
VACUUM_DENSITY_REL = 1e-12


@dataclass(frozen=True)
class FieldSlice:
    """Fields at fixed t: ac density/momentum/velocity, atoms, field E."""

    t: float
    x: np.ndarray
    rho: np.ndarray
    mom: np.ndarray
    u: np.ndarray
    E: np.ndarray
    atoms: tuple[SliceAtom, ...]
    R: np.ndarray
    M: np.ndarray
    wtilde: np.ndarray
    field_integral: np.ndarray
    total_mass: float

    def ac_mass(self) -> float:
        return float(np.trapezoid(self.rho, self.x))

    def atom_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms))


def _segment_derivative(x: np.ndarray, f: np.ndarray, seg: np.ndarray) -> np.ndarray:
    """Per-segment finite differences: centered inside, one-sided at the ends."""
    out = np.zeros_like(f)
    for s in np.unique(seg):
        idx = np.flatnonzero(seg == s)
        if idx.size < 2:
            continue
        xi, fi = x[idx], f[idx]
        d = np.empty_like(fi)
        d[1:-1] = (fi[2:] - fi[:-2]) / (xi[2:] - xi[:-2]) if idx.size > 2 else 0.0
        d[0] = (fi[1] - fi[0]) / (xi[1] - xi[0])
        d[-1] = (fi[-1] - fi[-2]) / (xi[-1] - xi[-2])
        out[idx] = d
    return out


def differentiate(slc: SolutionSlice) -> FieldSlice:
    """Recover (rho, m, u, E) from a solution slice on its grid."""
    x, R, M = slc.x, slc.R, slc.M
    if x.size < 2:
        raise ValueError("grid must have at least two points")
    z = np.array([a.position for a in slc.atoms])
    scale = max(1.0, float(np.max(np.abs(x))))
    tol = 1e-9 * scale

    # Segment the grid at atom positions; a point exactly at an atom joins
    # the right segment (R is right-continuous, so its sample already
    # includes the atom mass and differencing within the segment is clean).
    seg = np.searchsorted(z, x, side="right")
    rho = _segment_derivative(x, R, seg)
    mom = _segment_derivative(x, M, seg)
    rho = np.maximum(rho, 0.0)

    domain = float(x[-1] - x[0])
    floor = VACUUM_DENSITY_REL * slc.total_mass / max(domain, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(rho > floor, mom / rho, np.nan)

    # Average rule: samples sitting on an atom (jump included) show the
    # midpoint of the one-sided limits.
    E = R.astype(float).copy()
    for atom in slc.atoms:
        included = E >= atom.mass_below + atom.mass * (1 - 1e-12)
        on = (np.abs(x - atom.position) <= tol) & included
        if on.any():
            E[on] = E[on] - 0.5 * atom.mass
    return FieldSlice(
        t=slc.t, x=x, rho=rho, mom=mom, u=u, E=E, atoms=slc.atoms,
        R=R, M=M, wtilde=slc.wtilde, field_integral=slc.field_integral,
        total_mass=slc.total_mass)


def _bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def _dbump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    g = 1.0 - si * si
    out[inside] = np.exp(-1.0 / g) * (-2.0 * si / (g * g))
    return out


def _d2bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    g = 1.0 - si * si
    gp = -2.0 * si / (g * g)
    gpp = -2.0 * (1.0 + 3.0 * si * si) / (g * g * g)
    out[inside] = np.exp(-1.0 / g) * (gp * gp + gpp)
    return out


@dataclass(frozen=True)
class BumpTestFunction:
    """Tensor-product mollifier supported on |x-cx|<rx, |t-ct|<rt."""

    x_center: float
    x_radius: float
    t_center: float
    t_radius: float

    def _sx(self, x):
        return (np.asarray(x, dtype=float) - self.x_center) / self.x_radius

    def _st(self, t):
        return (np.asarray(t, dtype=float) - self.t_center) / self.t_radius

    def value(self, x, t) -> np.ndarray:
        """phi on the tensor grid, shape (len(t), len(x))."""
        return np.outer(_bump(self._st(t)), _bump(self._sx(x)))

    def dxx(self, x, t) -> np.ndarray:
        return np.outer(_bump(self._st(t)), _d2bump(self._sx(x))) / self.x_radius**2

    def dxt(self, x, t) -> np.ndarray:
        return (np.outer(_dbump(self._st(t)), _dbump(self._sx(x)))
                / (self.x_radius * self.t_radius))


def weak_residual(fields: list[FieldSlice], test_fn: BumpTestFunction
                  ) -> tuple[float, float]:
    """Mass and momentum weak-form residuals over the space-time grid.

    Requires a common space grid, a uniform time grid and a test function
    vanishing on the grid boundary; integrals by trapezoid quadrature.
    """
    if len(fields) < 3:
        raise ValueError("need at least three time slices")
    x = fields[0].x
    for f in fields[1:]:
        if f.x.shape != x.shape or not np.array_equal(f.x, x):
            raise ValueError("slices must share a common space grid")
    times = np.array([f.t for f in fields])
    dts = np.diff(times)
    if np.any(dts <= 0) or (dts.max() - dts.min()) > 1e-9 * dts.max():
        raise ValueError("time grid must be uniform and increasing")

    phi = test_fn.value(x, times)
    interior = float(np.max(np.abs(phi)))
    if interior == 0.0:
        raise ValueError("test function vanishes on the whole grid")
    edge = max(np.max(np.abs(phi[0])), np.max(np.abs(phi[-1])),
               np.max(np.abs(phi[:, 0])), np.max(np.abs(phi[:, -1])))
    if edge > 1e-13 * interior:
        raise ValueError("test function must vanish at the grid boundary")

    phi_xt = test_fn.dxt(x, times)
    phi_xx = test_fn.dxx(x, times)

    R = np.stack([f.R for f in fields])
    M = np.stack([f.M for f in fields])
    W = np.stack([f.wtilde for f in fields])
    F = np.stack([f.field_integral for f in fields])
    # Z(x, t) with Z_x = F, anchored at the left grid edge.
    Z = np.concatenate([
        np.zeros((len(fields), 1)),
        np.cumsum(0.5 * (F[:, 1:] + F[:, :-1]) * np.diff(x)[None, :], axis=1),
    ], axis=1)

    def integrate(term: np.ndarray) -> float:
        return float(np.trapezoid(np.trapezoid(term, x, axis=1), times))

    res_mass = integrate(R * phi_xt + M * phi_xx)
    res_mom = integrate(M * phi_xt + (W - Z) * phi_xx)
    return res_mass, res_mom
