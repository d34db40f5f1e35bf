"""Single-site measure of the density spin model, in log space.

The unnormalized site measure at chemical potential lam is

    omega(d rho) = exp(M (lam rho + alpha/2 rho^2 - f_gamma(rho))) nu(d rho),
    M = beta * gamma^(-d),

with nu Lebesgue in the continuous case and the atom measure
gamma^d * sum_k delta(k gamma^d) in the discrete case.  Exponents reach
hundreds at small gamma, so every routine here works with logarithms
(logsumexp-style trapezoid quadrature for the continuous case, exact atom
sums for the discrete one).
"""

import math

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateMeasureError
from .freeenergy import HARD_CORE

_REFINE_TOL = 1e-10
_MAX_POINTS = 1 << 20


def site_exponent(p, rho):
    """M (lam rho + alpha/2 rho^2 - f_gamma(rho)); -inf where f is infinite."""
    rho = np.asarray(rho, dtype=float)
    f = p.spec.f_gamma(p.gamma, rho)
    with np.errstate(invalid="ignore"):
        out = p.site_scale * (p.lam * rho + 0.5 * p.alpha * rho ** 2 - f)
    return np.where(np.isinf(np.asarray(f)), -np.inf, out)


def support_upper(p, pad=60.0):
    """Density beyond which the site exponent is negligible relative to
    its maximum (hard-core: the forbidden threshold)."""
    spec = p.spec
    if spec.case == HARD_CORE:
        return float(spec.rho_max)
    # scan to find the max, then extend until the exponent drops `pad` below it
    hi = 1.0
    cap = None
    if spec.limit_rho is not None and not spec.has_tables():
        cap = float(spec.limit_rho[-1])
    best = -np.inf
    while True:
        probe = np.linspace(0.0, hi if cap is None else min(hi, cap), 257)
        vals = site_exponent(p, probe)
        best = max(best, float(np.max(vals)))
        if float(vals[-1]) < best - pad:
            break
        if cap is not None and hi >= cap:
            return cap
        if hi > 2.0 ** 40:
            break
        hi *= 2.0
    return float(probe[-1])


def _log_trapezoid(g, lo, hi):
    """log integral of exp(g) over [lo, hi] by refining trapezoid rule."""
    if hi <= lo:
        return -np.inf
    n = 129
    prev = None
    while True:
        x = np.linspace(lo, hi, n)
        gx = g(x)
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        with np.errstate(divide="ignore"):
            val = logsumexp(gx + np.log(w))
        if prev is not None and (val == -np.inf or abs(val - prev) < _REFINE_TOL):
            return float(val)
        prev = val
        if n >= _MAX_POINTS:
            return float(val)
        n = 2 * n - 1


def log_mass(p, intervals=None):
    """log omega of an interval union (whole support when intervals is None)."""
    if intervals is None:
        intervals = [(0.0, support_upper(p))]
    if p.domain == "discrete":
        values, logw = discrete_site_atoms(p)
        total = -np.inf
        for lo, hi in intervals:
            sel = (values >= lo - 1e-12) & (values <= hi + 1e-12)
            if sel.any():
                total = np.logaddexp(total, logsumexp(logw[sel]))
        return float(total)
    top = support_upper(p)
    total = -np.inf
    for lo, hi in intervals:
        lo, hi = max(0.0, lo), min(hi, top)
        if hi <= lo:
            continue
        total = np.logaddexp(total, _log_trapezoid(lambda x: site_exponent(p, x), lo, hi))
    return float(total)


def discrete_site_atoms(p):
    """Atom values and their log weights (exponent + atom mass log gamma^d)."""
    spec = p.spec
    step = p.gamma ** p.d
    if spec.case == HARD_CORE:
        n_max = int(math.floor(spec.rho_max / step + 1e-9))
    else:
        # extend until the weight is negligible
        n_max = 16
        while True:
            vals = step * np.arange(n_max + 1)
            expo = site_exponent(p, vals)
            if np.max(expo) - expo[-1] > 60.0 or n_max > 1_000_000:
                break
            n_max *= 2
    values = step * np.arange(n_max + 1)
    logw = site_exponent(p, values) + p.d * math.log(p.gamma)
    if not np.any(np.isfinite(logw)):
        raise DegenerateMeasureError("all site atoms carry zero weight")
    return values, logw


def normalized_moments(p):
    """Mean and variance of the normalized site measure."""
    if p.domain == "discrete":
        values, logw = discrete_site_atoms(p)
        w = np.exp(logw - logsumexp(logw))
        mean = float(np.sum(w * values))
        var = float(np.sum(w * (values - mean) ** 2))
        return mean, var
    top = support_upper(p)
    x = np.linspace(0.0, top, 1 << 14)
    g = site_exponent(p, x)
    g = g - np.max(g[np.isfinite(g)])
    w = np.exp(np.where(np.isfinite(g), g, -np.inf))
    z = np.trapz(w, x)
    if z <= 0:
        raise DegenerateMeasureError("site measure has zero mass")
    mean = float(np.trapz(w * x, x) / z)
    var = float(np.trapz(w * (x - mean) ** 2, x) / z)
    return mean, var
