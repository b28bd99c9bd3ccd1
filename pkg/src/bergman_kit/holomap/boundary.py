"""Boundary behaviour of self-maps: self-map screening, angular derivatives,
matching boundary data and order of contact."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BoundaryEscape, DegenerateFit, NotSelfMap, PoleAtPoint
from .ast import Node, denominators, evaluate, has_division

SELF_MAP_TOL = 1e-9


def polar_grid(grid_size: int, r_out: float = 1.0 - 1e-6):
    """Rings accumulating at ``r_out`` times ``grid_size`` equispaced angles."""
    n_rings = max(8, grid_size // 4)
    gaps = np.geomspace(1.0, 1.0 - r_out, n_rings)
    radii = np.concatenate([[0.0], 1.0 - gaps[1:]])
    th = 2.0 * np.pi * np.arange(grid_size) / grid_size
    return (radii[:, None] * np.exp(1j * th)[None, :]).ravel()


def _screen_poles(m: Node, z):
    if has_division(m):
        for d in denominators(m, z):
            bad = ~np.isfinite(d) | (np.abs(d) < 1e-300)
            if bad.any():
                raise PoleAtPoint(f"divisor vanishes near z={complex(np.asarray(z)[bad][0])!r}")


def self_map_check(m: Node, grid_size: int = 256, tol: float = SELF_MAP_TOL) -> dict:
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    z = polar_grid(grid_size)
    _screen_poles(m, z)
    vals = np.abs(evaluate(m, z))
    i = int(np.argmax(vals))
    out = {"max_modulus": float(vals[i]), "argmax": complex(z[i])}
    if not vals[i] <= 1.0 + tol:
        raise NotSelfMap(out["max_modulus"], out["argmax"])
    return out


def richardson3(h, q) -> float:
    """Value at ``h = 0`` of the quadratic through the last three ``(h, q)`` pairs."""
    h = np.asarray(h, dtype=float)[-3:]
    q = np.asarray(q, dtype=float)[-3:]
    if h.size < 3:
        return float(q[-1])
    total = 0.0
    for i in range(3):
        li = 1.0
        for j in range(3):
            if j != i:
                li *= (0.0 - h[j]) / (h[i] - h[j])
        total += li * q[i]
    return float(total)


def default_radii(n: int = 12, lo: float = 1e-1, hi: float = 1e-3):
    return 1.0 - np.geomspace(lo, hi, n)


def angular_derivative(m: Node, zeta: complex, radii=None) -> dict:
    """Julia-Caratheodory quotients ``(1 - |phi(r zeta)|) / (1 - r)`` along a radius."""
    zeta = complex(zeta)
    if abs(abs(zeta) - 1.0) > 1e-12:
        raise ValueError("zeta must be unimodular")
    r = np.asarray(default_radii() if radii is None else radii, dtype=float)
    vals = np.abs(evaluate(m, r * zeta))
    if np.any(vals >= 1.0):
        i = int(np.argmax(vals >= 1.0))
        raise BoundaryEscape(f"|phi| >= 1 at interior point {r[i] * zeta!r}")
    quot = (1.0 - vals) / (1.0 - r)
    return {"quotients": quot.tolist(), "extrapolated_liminf": richardson3(1.0 - r, quot)}


class _SameMap:
    """Marker: the two maps coincide on every sample."""

    def __repr__(self):
        return "SameMap"

    def __bool__(self):
        return False


SameMap = _SameMap()


@dataclass(frozen=True)
class ContactFit:
    slope: float
    residual: float
    same_order: int

    def to_dict(self):
        return {"slope": self.slope, "residual": self.residual, "same_order": self.same_order}


def data_contact_order(phi: Node, psi: Node, zeta: complex, radii=None, strict: bool = False):
    """Slope of ``log|phi - psi|`` against ``log|z - zeta|`` along the radius to ``zeta``.

    A slope ``s`` means ``phi - psi = O(|z - zeta|^s)``, so the maps share boundary
    data through order ``ceil(s - 0.1) - 1``.  Returns :data:`SameMap` when the
    maps agree on every sample (raises :class:`DegenerateFit` if ``strict``).
    """
    zeta = complex(zeta)
    r = np.asarray(default_radii(12, 2e-1, 1e-2) if radii is None else radii, dtype=float)
    z = r * zeta
    diff = np.abs(evaluate(phi, z) - evaluate(psi, z))
    if np.all(diff == 0):
        if strict:
            raise DegenerateFit("maps coincide on the samples")
        return SameMap
    keep = diff > 0
    x = np.log(np.abs(z - zeta))[keep]
    y = np.log(diff[keep])
    if x.size < 2:
        raise DegenerateFit("fewer than two usable samples")
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coef[0])
    resid = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return ContactFit(slope=slope, residual=resid, same_order=int(np.ceil(slope - 0.1)) - 1)


def order_of_contact_check(m: Node, zeta: complex, k: float, radii=None,
                           half_angle: float = 0.25, n_angles: int = 401) -> dict:
    """Infimum of ``(1 - |phi(z)|) / |phi(zeta) - phi(z)|^k`` over a boundary sector at ``zeta``."""
    if not k > 0:
        raise ValueError("k must be positive")
    zeta = complex(zeta)
    r = np.asarray(1.0 - np.geomspace(1e-1, 1e-6, 11) if radii is None else radii, dtype=float)
    th = np.linspace(-half_angle, half_angle, n_angles)
    z = (r[:, None] * zeta * np.exp(1j * th)[None, :]).ravel()
    _screen_poles(m, np.append(z, zeta))
    f_zeta = complex(evaluate(m, zeta))
    fz = evaluate(m, z)
    num = 1.0 - np.abs(fz)
    den = np.abs(f_zeta - fz) ** k
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, num / den, np.inf)
    i = int(np.argmin(q))
    return {"infimum": float(max(q[i], 0.0)), "witness": complex(z[i])}
