"""Mean-field layer: tilted free energy, convex envelopes, coexistence.

The central object is the grand potential density

    phi_lam(rho) = -lam * rho - (alpha/2) * rho**2 + f(rho)

whose global minimum over density gives (minus) the limiting pressure, and
whose double-well structure at the coexistence chemical potential encodes the
vapor and liquid densities.  All routines work on a uniform density grid and
polish extrema with a bounded scalar minimizer when the free energy is
analytic.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, DomainError, NoCoexistenceError
from .freeenergy import FreeEnergySpec, HARD_CORE

DEFAULT_GRID_POINTS = 4096
LAMBDA_TOL = 1e-10       # bisection width on the coexistence chemical potential
VALUE_TOL = 1e-9         # tolerance when comparing minimum values
_XATOL = 1e-12


def grand_potential(spec: FreeEnergySpec, alpha, lam, rho):
    """phi_lam(rho); +inf exactly where the reference free energy is +inf."""
    spec.require_alpha(alpha)
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise DomainError("density must be non-negative")
    f = spec.f(rho_arr)
    out = -lam * rho_arr - 0.5 * alpha * rho_arr ** 2 + f
    return out if np.ndim(rho) else float(out)


def default_grid(spec: FreeEnergySpec, alpha=0.0, lam=0.0, n=DEFAULT_GRID_POINTS):
    """Uniform density grid covering everything that can matter.

    Hard-core: [0, rho_max].  Soft-core with finite growth rate: truncated
    where the quadratic lower bound (alpha_max/2 - alpha/2) rho^2 - |lam| rho
    exceeds phi_lam(0) + 10, so the global minimum is certified to lie left of
    the cut.  Soft-core without a finite rate: direct doubling scan of phi.

    Tabulated limits are analyzed on their own node grid: the extrema of a
    piecewise-linear interpolant sit at nodes, so any other grid only loses
    accuracy.
    """
    spec.require_alpha(alpha)
    if spec.kind == "tabulated" and spec.limit_rho is not None:
        return spec.limit_rho.copy()
    if spec.case == HARD_CORE:
        hi = spec.rho_max
    else:
        phi0 = grand_potential(spec, alpha, lam, 0.0)
        target = phi0 + 10.0
        cap = spec.limit_rho[-1] if spec.limit_rho is not None else None
        if math.isfinite(spec.alpha_max) and spec.alpha_max > alpha:
            c = 0.5 * (spec.alpha_max - alpha)
            hi = (abs(lam) + math.sqrt(lam * lam + 4.0 * c * max(target - phi0 + 1.0, 1.0))) / (2.0 * c)
            hi = max(hi, 1.0)
        else:
            hi = 1.0
            while True:
                if cap is not None and hi >= cap:
                    hi = cap
                    break
                val = grand_potential(spec, alpha, lam, min(hi, cap) if cap else hi)
                if val > target or hi > 2.0 ** 40:
                    break
                hi *= 2.0
        if cap is not None:
            hi = min(hi, cap)
    return np.linspace(0.0, float(hi), n)


# ----------------------------------------------------------------- envelope


def convex_envelope(rho, values):
    """Lower convex hull of (rho, values) restricted to the grid.

    A trailing infinite region is truncated first; interior infinities are
    rejected.  Returns (rho_finite, envelope_values).
    """
    rho = np.asarray(rho, dtype=float)
    values = np.asarray(values, dtype=float)
    if rho.ndim != 1 or rho.shape != values.shape:
        raise DomainError("envelope input must be two parallel 1-d arrays")
    if np.any(np.diff(rho) <= 0):
        raise DomainError("envelope grid must be strictly increasing")
    finite = np.isfinite(values)
    if not finite.all():
        k = int(np.argmin(finite))
        if finite[k:].any():
            raise DomainError("non-finite values must form a trailing region")
        rho, values = rho[:k], values[:k]
    if rho.size < 2:
        raise DomainError("need at least two finite points")
    hull = [0]
    for k in range(1, rho.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (rho[b] - rho[a]) * (values[k] - values[a]) \
                - (rho[k] - rho[a]) * (values[b] - values[a])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(k)
    idx = np.array(hull)
    ce = np.interp(rho, rho[idx], values[idx])
    return rho, np.minimum(ce, values)


def _nonconvexity_witness(rho, values, tol):
    """Maximal interval where values exceed their convex envelope by > tol.

    Also reports the density of the largest gap, a convenient point for
    splitting the grid into the two convexity basins.
    """
    rho_f, ce = convex_envelope(rho, values)
    gap = values[: rho_f.size] - ce
    above = gap > tol
    if not above.any():
        return False, None, None, rho_f, ce
    i = int(np.argmax(above))
    j = rho_f.size - 1 - int(np.argmax(above[::-1]))
    lo = rho_f[i - 1] if i > 0 else rho_f[0]
    hi = rho_f[j + 1] if j + 1 < rho_f.size else rho_f[-1]
    split = float(rho_f[int(np.argmax(gap))])
    return True, (float(lo), float(hi)), split, rho_f, ce


def detect_nonconvexity(spec: FreeEnergySpec, alpha, n=DEFAULT_GRID_POINTS, tol=VALUE_TOL):
    """Flag whether phi is non-convex, with the witness interval.

    The answer does not depend on the chemical potential: a linear tilt
    leaves convexity and the envelope gap unchanged.
    """
    grid = default_grid(spec, alpha, 0.0, n)
    phi = grand_potential(spec, alpha, 0.0, grid)
    flag, witness, _, _, _ = _nonconvexity_witness(grid, phi, tol)
    return flag, witness


# -------------------------------------------------------------- coexistence


@dataclass
class MeanFieldAnalysis:
    lam_star: float
    m_star: float
    rho_minus: float
    rho_plus: float
    rho_zero: float | None
    minimizers: np.ndarray
    envelope_rho: np.ndarray
    envelope_phi: np.ndarray
    envelope_ce: np.ndarray
    nonconvex: bool
    witness: tuple | None
    flat_coexistence: bool
    barrier: float

    def to_json_dict(self):
        return {
            "lam_star": self.lam_star,
            "m_star": self.m_star,
            "rho_minus": self.rho_minus,
            "rho_plus": self.rho_plus,
            "rho_zero": self.rho_zero,
            "minimizers": self.minimizers.tolist(),
            "nonconvex": self.nonconvex,
            "witness": list(self.witness) if self.witness else None,
            "flat_coexistence": self.flat_coexistence,
            "barrier": self.barrier,
        }


def _polish_min(fun, lo, hi, seed):
    """Bounded scalar minimum; falls back to the seed point if polish fails."""
    if hi - lo <= 4 * _XATOL:
        return seed, fun(seed)
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded",
                          options={"xatol": _XATOL})
    cands = [(fun(seed), seed), (float(res.fun), float(res.x)),
             (fun(lo), lo), (fun(hi), hi)]
    val, arg = min(cands, key=lambda t: t[0])
    return arg, val


def _basin_minimum(spec, alpha, grid, phi0_vals, mask, lam, analytic):
    """Minimum of phi_lam over the masked part of the grid, polished.

    The polish bracket extends one grid step past the mask edge (clipped to
    the grid) so a touch point lying between mask boundary nodes is reached.
    """
    vals = phi0_vals[mask] - lam * grid[mask]
    k = int(np.argmin(vals))
    sub = grid[mask]
    seed = float(sub[k])
    if not analytic:
        return seed, float(vals[k])
    h = float(grid[1] - grid[0])
    lo = max(float(grid[0]), float(sub[k - 1]) if k > 0 else seed - h)
    hi = min(float(grid[-1]), float(sub[k + 1]) if k + 1 < sub.size else seed + h)
    fun = lambda r: grand_potential(spec, alpha, lam, r)
    return _polish_min(fun, lo, hi, seed)


def find_coexistence(spec: FreeEnergySpec, alpha, n=DEFAULT_GRID_POINTS,
                     lam_tol=LAMBDA_TOL, value_tol=VALUE_TOL):
    """Coexistence data by bisection on the difference of basin minima.

    Requires a non-convex grand potential.  The two basins are the grid
    regions left and right of the non-convexity witness interval; the
    coexistence chemical potential is the root of
    (left basin minimum) - (right basin minimum), which is strictly
    increasing in the chemical potential.
    """
    grid = default_grid(spec, alpha, 0.0, n)
    phi0 = grand_potential(spec, alpha, 0.0, grid)
    flag, witness, split, env_rho, env_ce = _nonconvexity_witness(grid, phi0, value_tol)
    if not flag:
        raise NoCoexistenceError("grand potential is convex: no double well")
    a, b = witness
    left = grid < split
    right = (grid >= split) & np.isfinite(phi0)
    if not left.any() or not right.any():
        raise NoCoexistenceError("degenerate witness interval")
    analytic = spec.kind != "tabulated"

    def delta(lam):
        _, m_l = _basin_minimum(spec, alpha, grid, phi0, left, lam, analytic)
        _, m_r = _basin_minimum(spec, alpha, grid, phi0, right, lam, analytic)
        return m_l - m_r

    ia = int(np.searchsorted(grid, a))
    ib = min(int(np.searchsorted(grid, b)), grid.size - 1)
    while not math.isfinite(phi0[ib]) and ib > ia:
        ib -= 1
    chord = (phi0[ib] - phi0[ia]) / (grid[ib] - grid[ia])
    radius = 0.5
    lo, hi = chord - radius, chord + radius
    dlo, dhi = delta(lo), delta(hi)
    while dlo * dhi > 0:
        radius *= 2.0
        if radius > 64.0 * (1.0 + abs(chord)):
            raise NoCoexistenceError("no chemical potential equalizes the two basins")
        lo, hi = chord - radius, chord + radius
        dlo, dhi = delta(lo), delta(hi)
    while hi - lo > lam_tol:
        mid = 0.5 * (lo + hi)
        dm = delta(mid)
        if dm == 0.0:
            lo = hi = mid
            break
        if dlo * dm < 0:
            hi, dhi = mid, dm
        else:
            lo, dlo = mid, dm
    lam_star = 0.5 * (lo + hi)

    rho_minus, m_l = _basin_minimum(spec, alpha, grid, phi0, left, lam_star, analytic)
    rho_plus, m_r = _basin_minimum(spec, alpha, grid, phi0, right, lam_star, analytic)
    m_star = min(m_l, m_r)

    phi_star = phi0 - lam_star * grid
    # grid-resolved minimizer set, with an allowance so that both basin grid
    # minima are always included despite O(h^2) curvature offsets
    left_grid_min = float(np.min(phi_star[left]))
    right_grid_min = float(np.min(phi_star[right]))
    level = max(left_grid_min, right_grid_min) + value_tol
    minimizers = grid[phi_star <= level]

    between = (grid > rho_minus) & (grid < rho_plus) & np.isfinite(phi_star)
    if not between.any():
        raise NoCoexistenceError("no grid point strictly between the basin minima")
    kz = int(np.argmax(np.where(between, phi_star, -np.inf)))
    rho_zero = float(grid[kz])
    barrier = float(phi_star[kz] - m_star)
    flat = barrier <= 10.0 * value_tol
    if flat:
        rho_zero = None

    return MeanFieldAnalysis(
        lam_star=float(lam_star), m_star=float(m_star),
        rho_minus=float(rho_minus), rho_plus=float(rho_plus),
        rho_zero=rho_zero, minimizers=minimizers,
        envelope_rho=env_rho, envelope_phi=phi0[: env_rho.size], envelope_ce=env_ce,
        nonconvex=True, witness=witness, flat_coexistence=flat,
        barrier=barrier)


# ---------------------------------------------------------------- pressures


def van_der_waals_pressure(T, rho, a, b):
    """T rho / (1 - rho b) - a rho^2 / 2."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("density must be non-negative")
    if np.any(rho * b >= 1.0):
        raise DomainError("density at or beyond close packing 1/b")
    out = T * rho / (1.0 - rho * b) - 0.5 * a * rho ** 2
    return out if out.shape else float(out)


def pressure_from_free_energy(rho_grid, f_grid, rho):
    """rho^2 d/drho [f/rho] by central differences at the nearest grid node."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    f_grid = np.asarray(f_grid, dtype=float)
    i = int(np.argmin(np.abs(rho_grid - rho)))
    if i < 1 or i > rho_grid.size - 2:
        raise DomainError("density too close to the grid boundary")
    lo, hi = i - 1, i + 1
    if rho_grid[lo] <= 0:
        raise DomainError("f/rho undefined at zero density")
    if not (np.isfinite(f_grid[lo]) and np.isfinite(f_grid[i]) and np.isfinite(f_grid[hi])):
        raise DomainError("free energy not finite near the requested density")
    h_lo = f_grid[lo] / rho_grid[lo]
    h_hi = f_grid[hi] / rho_grid[hi]
    slope = (h_hi - h_lo) / (rho_grid[hi] - rho_grid[lo])
    return float(rho_grid[i] ** 2 * slope)


def mean_field_pressure(spec: FreeEnergySpec, alpha, lam, n=DEFAULT_GRID_POINTS):
    """Limiting grand-canonical pressure: -min over density of phi_lam."""
    grid = default_grid(spec, alpha, lam, n)
    phi = grand_potential(spec, alpha, lam, grid)
    k = int(np.argmin(phi))
    best_rho, best = float(grid[k]), float(phi[k])
    if spec.kind != "tabulated":
        lo = float(grid[max(k - 1, 0)])
        hi = float(grid[min(k + 1, grid.size - 1)])
        _, best = _polish_min(lambda r: grand_potential(spec, alpha, lam, r), lo, hi, best_rho)
    return -best
