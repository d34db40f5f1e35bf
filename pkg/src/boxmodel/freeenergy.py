"""Reference free energies of the cell model.

A :class:`FreeEnergySpec` bundles the limiting free energy density ``f`` with
an optional family of finite-scale tabulations ``f_gamma`` (one table per
scale ``gamma``) and the metadata that controls how the rest of the package
treats it:

* hard-core case: densities above ``rho_cp`` are forbidden in the limit
  (``f = +inf`` there) and every family member is infinite above ``rho_max``;
* soft-core case: ``f`` is finite on ``[0, inf)`` and ``alpha_max`` records
  the quadratic growth rate ``liminf f(rho) / (rho^2/2)``.

Built-in analytic kinds are the ideal gas and the one-dimensional hard-rod
(Tonks) gas; everything else enters as a tabulated spec with linear
interpolation between nodes.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigurationError, DomainError

HARD_CORE = "hard-core"
SOFT_CORE = "soft-core"

_KINDS = ("ideal-gas", "tonks", "tabulated")


def _as_float_array(x):
    return np.asarray(x, dtype=float)


@dataclass
class FreeEnergySpec:
    kind: str
    case: str
    beta: float
    b: float | None = None
    rho_cp: float | None = None
    rho_max: float | None = None
    alpha_max: float = math.inf
    limit_rho: np.ndarray | None = None
    limit_f: np.ndarray | None = None
    # per-scale tables, parallel lists: gammas[i] owns (table_rho[i], table_f[i], table_stderr[i])
    gammas: list = field(default_factory=list)
    table_rho: list = field(default_factory=list)
    table_f: list = field(default_factory=list)
    table_stderr: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown free-energy kind {self.kind!r}")
        if self.case not in (HARD_CORE, SOFT_CORE):
            raise ConfigurationError(f"unknown case {self.case!r}")
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if self.kind == "tonks" and (self.b is None or self.b <= 0):
            raise ConfigurationError("tonks kind requires a positive rod length b")
        if self.case == HARD_CORE:
            if self.rho_cp is None or self.rho_max is None:
                raise ConfigurationError("hard-core case requires rho_cp and rho_max")
            if not (0 < self.rho_cp < self.rho_max):
                raise ConfigurationError("hard-core case requires 0 < rho_cp < rho_max")
        if self.limit_rho is not None:
            self.limit_rho = _as_float_array(self.limit_rho)
            self.limit_f = _as_float_array(self.limit_f)
            if self.limit_rho.ndim != 1 or self.limit_rho.shape != self.limit_f.shape:
                raise ConfigurationError("limit grid must be two parallel 1-d arrays")
            if np.any(np.diff(self.limit_rho) <= 0):
                raise ConfigurationError("limit grid densities must be strictly increasing")
        self.gammas = [float(g) for g in self.gammas]
        self.table_rho = [_as_float_array(r) for r in self.table_rho]
        self.table_f = [_as_float_array(v) for v in self.table_f]
        self.table_stderr = [_as_float_array(s) for s in self.table_stderr]

    # ---------------------------------------------------------------- limit f

    def f(self, rho):
        """Limiting free energy density, +inf outside the finite domain."""
        rho = _as_float_array(rho)
        if np.any(rho < 0):
            raise DomainError("density must be non-negative")
        if self.kind == "ideal-gas":
            out = _ideal_gas_f(rho, self.beta)
        elif self.kind == "tonks":
            out = _tonks_f(rho, self.b, self.beta)
        else:
            out = self._interp_limit(rho)
        if self.case == HARD_CORE:
            out = np.where(rho > self.rho_cp, np.inf, out)
        return out if out.shape else float(out)

    def _interp_limit(self, rho):
        if self.limit_rho is None:
            raise ConfigurationError("tabulated spec has no limit grid")
        hi = self.limit_rho[-1]
        out = np.interp(rho, self.limit_rho, self.limit_f)
        out = np.asarray(out, dtype=float)
        if self.case == HARD_CORE:
            out = np.where(rho > hi, np.inf, out)
        elif np.any(rho > hi * (1 + 1e-12)):
            raise DomainError("density beyond the tabulated soft-core grid")
        return out

    # --------------------------------------------------------------- family f

    def has_tables(self):
        return bool(self.gammas)

    def f_gamma(self, gamma, rho):
        """Family member at scale ``gamma``; linear interpolation for tables.

        Analytic kinds without per-scale tables use the limit itself.
        """
        rho = _as_float_array(rho)
        if np.any(rho < 0):
            raise DomainError("density must be non-negative")
        if not self.gammas:
            return self.f(rho)
        g = float(gamma)
        try:
            i = next(j for j, gj in enumerate(self.gammas) if abs(gj - g) <= 1e-12 * max(1.0, abs(gj)))
        except StopIteration:
            raise ConfigurationError(f"no table for gamma={gamma!r}; have {self.gammas}")
        nodes, vals = self.table_rho[i], self.table_f[i]
        finite = np.isfinite(vals)
        if not finite.all():
            # interpolate on the finite prefix; anything at or beyond the first
            # infinite node is infinite
            k = int(np.argmin(finite))  # first False
            cut = nodes[k]
            out = np.interp(rho, nodes[:k], vals[:k])
            out = np.where(rho >= cut, np.inf, out)
        else:
            out = np.interp(rho, nodes, vals)
            if self.case == HARD_CORE:
                out = np.where(rho > nodes[-1], np.inf, out)
        out = np.asarray(out, dtype=float)
        return out if out.shape else float(out)

    def stderr_gamma(self, gamma, rho):
        """Monte Carlo standard error of the table at ``gamma`` (0 if exact)."""
        if not self.gammas:
            return np.zeros_like(_as_float_array(rho))
        g = float(gamma)
        i = next(j for j, gj in enumerate(self.gammas) if abs(gj - g) <= 1e-12 * max(1.0, abs(gj)))
        if self.table_stderr[i].size == 0:
            return np.zeros_like(_as_float_array(rho))
        return np.interp(_as_float_array(rho), self.table_rho[i], self.table_stderr[i])

    # ------------------------------------------------------------- invariants

    def check_continuity(self, n=2048, tol=None):
        """True if the limit has no jump above ``tol`` between adjacent grid
        points of its finite domain (the close-packing endpoint is exempt)."""
        if self.kind == "tabulated":
            rho = self.limit_rho
            vals = self.limit_f
        else:
            hi = self.rho_cp if self.case == HARD_CORE else 4.0
            rho = np.linspace(0.0, hi, n)
            vals = self.f(rho)
        finite = np.isfinite(vals)
        vals = np.asarray(vals)[finite]
        rho = np.asarray(rho)[finite]
        if len(vals) < 2:
            return True
        if tol is None:
            scale = max(1.0, float(np.max(np.abs(vals))))
            tol = 50.0 * scale / len(vals)
        jumps = np.abs(np.diff(vals))
        if self.case == HARD_CORE:
            # the divergence ramp into rho_cp is allowed to be steep
            keep = rho[1:] < 0.98 * self.rho_cp
            jumps = jumps[keep]
        return bool(np.all(jumps <= tol))

    def admissible_alpha(self, alpha):
        """Whether the quadratic coupling keeps the single-site measure finite.

        Non-positive alpha is always admissible because every supported f
        grows faster than linearly; positive alpha must stay below alpha_max.
        """
        return alpha <= 0 or alpha < self.alpha_max

    def require_alpha(self, alpha):
        if not self.admissible_alpha(alpha):
            raise ConfigurationError(
                f"alpha={alpha} >= alpha_max={self.alpha_max}: single-site measure diverges")

    # ------------------------------------------------------------------- JSON

    def to_json_dict(self):
        d = {
            "kind": self.kind,
            "case": self.case,
            "beta": self.beta,
            "alpha_max": None if math.isinf(self.alpha_max) else self.alpha_max,
        }
        if self.b is not None:
            d["b"] = self.b
        if self.rho_cp is not None:
            d["rho_cp"] = self.rho_cp
        if self.rho_max is not None:
            d["rho_max"] = self.rho_max
        if self.limit_rho is not None:
            d["limit"] = {"rho": self.limit_rho.tolist(), "f": self.limit_f.tolist()}
        if self.gammas:
            d["gammas"] = list(self.gammas)
            d["tables"] = [
                {
                    "rho": self.table_rho[i].tolist(),
                    "f": [v if math.isfinite(v) else None for v in self.table_f[i].tolist()],
                    "stderr": self.table_stderr[i].tolist(),
                }
                for i in range(len(self.gammas))
            ]
        return d

    @classmethod
    def from_json_dict(cls, d):
        alpha_max = d.get("alpha_max")
        tables = d.get("tables", [])
        table_f = [
            np.array([math.inf if v is None else v for v in t["f"]], dtype=float)
            for t in tables
        ]
        limit = d.get("limit")
        return cls(
            kind=d["kind"],
            case=d["case"],
            beta=d["beta"],
            b=d.get("b"),
            rho_cp=d.get("rho_cp"),
            rho_max=d.get("rho_max"),
            alpha_max=math.inf if alpha_max is None else alpha_max,
            limit_rho=None if limit is None else limit["rho"],
            limit_f=None if limit is None else limit["f"],
            gammas=d.get("gammas", []),
            table_rho=[t["rho"] for t in tables],
            table_f=table_f,
            table_stderr=[t.get("stderr", []) for t in tables],
        )


def _ideal_gas_f(rho, beta):
    rho = _as_float_array(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rho > 0, rho * (np.log(np.maximum(rho, 1e-300)) - 1.0) / beta, 0.0)
    return out


def _tonks_f(rho, b, beta):
    """Hard rods of length b: f = (rho/beta) (log(rho/(1-b rho)) - 1)."""
    rho = _as_float_array(rho)
    free = 1.0 - b * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = np.where((rho > 0) & (free > 0),
                          rho * (np.log(np.maximum(rho, 1e-300) / np.maximum(free, 1e-300)) - 1.0) / beta,
                          0.0)
    out = np.where(free <= 0, np.inf, inside)
    return out


def ideal_gas(beta=1.0):
    """Ideal-gas reference: f(rho) = rho (log rho - 1) / beta.

    Grows like rho log rho, so its quadratic growth rate is 0: no positive
    attraction strength is admissible on top of it.
    """
    return FreeEnergySpec(kind="ideal-gas", case=SOFT_CORE, beta=beta, alpha_max=0.0)


def tonks(b=1.0, beta=1.0):
    """One-dimensional hard rods of length ``b`` (exactly solvable)."""
    return FreeEnergySpec(
        kind="tonks", case=HARD_CORE, beta=beta, b=b,
        rho_cp=1.0 / b, rho_max=1.0 / b + 1.0, alpha_max=math.inf)


def from_table(rho, f, beta=1.0, case=SOFT_CORE, rho_cp=None, rho_max=None,
               alpha_max=math.inf):
    """Tabulated limit free energy with linear interpolation between nodes."""
    return FreeEnergySpec(
        kind="tabulated", case=case, beta=beta, rho_cp=rho_cp, rho_max=rho_max,
        alpha_max=alpha_max, limit_rho=rho, limit_f=f)
