"""Radial weights ``omega = exp(-eta)`` of the class W and their scale function tau.

Only the ``exp_inverse`` family ``eta(r) = A * (1 - r)**(-alpha)`` is provided.
Its Laplacian behaves like ``A*alpha*(alpha+1)*(1-r)**(-alpha-2)`` near the
boundary, so the representative ``tau(r) = tau_scale * (1-r)**((alpha+2)/2)``
is used throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidSpec, NotInClass

FAMILIES = ("exp_inverse",)


def default_grid(k_max: int = 40) -> np.ndarray:
    """Radii ``1 - 2**-k`` for ``k = 1..k_max``."""
    return 1.0 - np.ldexp(1.0, -np.arange(1, k_max + 1))


@dataclass(frozen=True)
class WeightSpec:
    family: str = "exp_inverse"
    A: float = 1.0
    alpha: float = 1.0
    tau_scale: float = 1.0
    # Debug override of the tau exponent, used to build non-members for
    # negative controls.  None selects (alpha + 2) / 2.
    tau_exponent: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"family: unknown weight family {self.family!r}")
        for name in ("A", "alpha", "tau_scale"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidSpec(f"{name}: must be a positive real, got {v!r}")
        if self.tau_exponent is not None and not self.tau_exponent > 0:
            raise InvalidSpec(f"tau_exponent: must be positive, got {self.tau_exponent!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "WeightSpec":
        data = dict(data)
        fam = data.pop("family", "exp_inverse")
        unknown = set(data) - {"A", "alpha", "tau_scale", "tau_exponent"}
        if unknown:
            raise InvalidSpec(f"weight: unknown field(s) {sorted(unknown)}")
        return cls(family=fam, **{k: (None if v is None else float(v)) for k, v in data.items()})

    def to_dict(self) -> dict:
        d = {"family": self.family, "A": self.A, "alpha": self.alpha,
             "tau_scale": self.tau_scale}
        if self.tau_exponent is not None:
            d["tau_exponent"] = self.tau_exponent
        return d


@dataclass(frozen=True)
class RadialWeight:
    spec: WeightSpec
    tau_power: float
    m: int
    c1: float
    c2: float
    m_tau: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "m_tau", min(1.0, 1.0 / self.c1, 1.0 / self.c2) / 4.0)

    # -- eta and its derivatives -------------------------------------------
    def eta(self, r):
        return self.spec.A * (1.0 - np.asarray(r, dtype=float)) ** (-self.spec.alpha)

    def eta_prime(self, r):
        a = self.spec.alpha
        return self.spec.A * a * (1.0 - np.asarray(r, dtype=float)) ** (-a - 1.0)

    def eta_second(self, r):
        a = self.spec.alpha
        return self.spec.A * a * (a + 1.0) * (1.0 - np.asarray(r, dtype=float)) ** (-a - 2.0)

    def eta_from_gap(self, gap):
        """``eta`` as a function of ``1 - r`` (keeps precision next to the boundary)."""
        return self.spec.A * np.asarray(gap, dtype=float) ** (-self.spec.alpha)

    def log_omega(self, r):
        return -self.eta(r)

    def delta_eta(self, r):
        """Planar Laplacian of ``eta(|z|)``; ``inf`` at the origin (cone point)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.eta_second(r) + np.where(r > 0, self.eta_prime(r) / np.where(r > 0, r, 1.0), np.inf)

    # -- tau -----------------------------------------------------------------
    def tau(self, r):
        return self.spec.tau_scale * (1.0 - np.asarray(r, dtype=float)) ** self.tau_power

    def tau_prime(self, r):
        p = self.tau_power
        return -self.spec.tau_scale * p * (1.0 - np.asarray(r, dtype=float)) ** (p - 1.0)

    def tau_z(self, z):
        return self.tau(np.abs(z))

    def eta_z(self, z):
        return self.eta(np.abs(z))

    def radial_distance(self, r0, r1):
        """Exact ``|int_{r0}^{r1} dt / tau(t)|``."""
        p, s = self.tau_power, self.spec.tau_scale
        lo = np.minimum(r0, r1)
        hi = np.maximum(r0, r1)
        if p == 1.0:
            return (np.log1p(-lo) - np.log1p(-hi)) / s
        q = 1.0 - p
        return ((1.0 - hi) ** q - (1.0 - lo) ** q) / (-q * s)

    def radius_at_distance(self, r0, dist):
        """Radius ``r >= r0`` with ``radial_distance(r0, r) == dist`` (1.0 if unreachable)."""
        p, s = self.tau_power, self.spec.tau_scale
        if p == 1.0:
            return 1.0 - (1.0 - r0) * np.exp(-dist * s)
        q = 1.0 - p
        base = (1.0 - r0) ** q - q * s * dist
        return 1.0 - np.where(base > 0, np.abs(base), 0.0) ** (1.0 / q)


def _tau_power(spec: WeightSpec) -> float:
    if spec.tau_exponent is not None:
        return float(spec.tau_exponent)
    return (spec.alpha + 2.0) / 2.0


def make_weight(spec: WeightSpec, grid: Sequence[float] | None = None) -> RadialWeight:
    """Build a weight and estimate ``c1``, ``c2`` by sampling tau on a geometric grid."""
    if not isinstance(spec, WeightSpec):
        raise InvalidSpec("make_weight expects a WeightSpec")
    p = _tau_power(spec)
    g = np.concatenate([[0.0], default_grid() if grid is None else np.asarray(grid, float)])
    s = spec.tau_scale
    tau = s * (1.0 - g) ** p
    c1 = float(np.max(tau / (1.0 - g)))
    c2 = float(np.max(np.abs(s * p * (1.0 - g) ** (p - 1.0))))
    m = max(1, math.ceil(p - 1e-12))
    return RadialWeight(spec=spec, tau_power=p, m=m, c1=c1, c2=c2)


def eval_weight(w: RadialWeight, r: float) -> dict:
    if not (0.0 <= r < 1.0):
        raise DomainError(f"radius must lie in [0, 1), got {r!r}")
    eta = float(w.eta(r))
    return {
        "eta": eta,
        "log_omega": -eta,
        "tau": float(w.tau(r)),
        "tau_prime": float(w.tau_prime(r)),
        "delta_eta": float(w.delta_eta(r)),
    }


def class_membership_report(w: RadialWeight, grid: Sequence[float] | None = None,
                            tol: float = 1e-4) -> dict:
    """Check the boundary conditions of the class W on ``grid``.

    Raises :class:`NotInClass` naming the first violated condition.
    """
    g = default_grid() if grid is None else np.sort(np.asarray(grid, dtype=float))
    if g[-1] < 1.0 - 1e-6:
        raise DomainError("grid must reach radius >= 1 - 1e-6")
    tau = w.tau(g)
    dtau = np.abs(w.tau_prime(g))
    interior = g[g > 0]
    min_delta = float(np.min(w.delta_eta(interior)))
    report = {
        "tau_limit": float(tau[-1]),
        "tau_prime_limit": float(dtau[-1]),
        "min_delta_eta": min_delta,
        "c1": w.c1,
        "c2": w.c2,
        "m_tau": w.m_tau,
        "m": w.m,
    }
    if not np.all(np.diff(w.eta(g)) > 0):
        raise NotInClass("eta_increasing")
    if not min_delta > 0:
        raise NotInClass("delta_eta_positive", f"(min {min_delta:.3g})")
    if not report["tau_limit"] < tol:
        raise NotInClass("tau_limit", f"(tau={report['tau_limit']:.3g})")
    # tau' must be small at the far end and still shrinking there.
    if not (report["tau_prime_limit"] < tol and dtau[-1] <= dtau[-2]):
        raise NotInClass("tau_prime_limit", f"(|tau'|={report['tau_prime_limit']:.3g})")
    # Minimality of m on the grid: tau/(1-r)^m bounded below, tau/(1-r)^(m-1) -> 0.
    lower = tau / (1.0 - g) ** w.m
    report["m_lower_bound"] = float(np.min(lower))
    if w.m > 1:
        report["m_minus_one_limit"] = float(tau[-1] / (1.0 - g[-1]) ** (w.m - 1))
    return report
