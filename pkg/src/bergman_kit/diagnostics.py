"""Numerical evidence for boundedness, compactness and compact differences of
composition operators on weighted Bergman spaces.

Every ratio ``omega(z) / omega(phi(z))`` is handled as ``exp(eta(phi(z)) - eta(z))``.
Boundary limits are read off along rays ``r * zeta`` by Richardson extrapolation
in ``h = 1 - r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryEscape
from .holomap import Node, evaluate
from .holomap.boundary import polar_grid, richardson3
from .metric import DEFAULT_RESOLUTION, rho_maps
from .weights import RadialWeight

N_RAYS = 16
COMPACT_TOL = 1e-6
RHO_NEAR_ONE = 0.9


def default_rays(n: int = N_RAYS) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


def default_ray_radii(k_lo: int = 3, k_hi: int = 14) -> np.ndarray:
    """Radii ``1 - 2**-k``; halving ``h`` suits the Richardson step."""
    return 1.0 - np.ldexp(1.0, -np.arange(k_lo, k_hi + 1))


def log_ratio(w: RadialWeight, m: Node, z) -> np.ndarray:
    """``eta(|m(z)|) - eta(|z|)``, i.e. ``log(omega(z) / omega(m(z)))``."""
    z = np.asarray(z, dtype=complex)
    img = np.abs(np.asarray(evaluate(m, z), dtype=complex))
    if np.any(~np.isfinite(img)) or np.any(img >= 1.0):
        bad = np.asarray(z).ravel()[np.argmax((~np.isfinite(img) | (img >= 1.0)).ravel())]
        raise BoundaryEscape(f"image of z={complex(bad)} leaves the disk")
    return w.eta(img) - w.eta(np.abs(z))


@dataclass(frozen=True, eq=False)
class RayProfile:
    zeta: complex
    radii: np.ndarray
    values: np.ndarray
    extrapolated_limit: float

    def to_dict(self) -> dict:
        return {"zeta": [self.zeta.real, self.zeta.imag], "radii": self.radii.tolist(),
                "values": self.values.tolist(), "extrapolated_limit": self.extrapolated_limit}


def _limit(radii, values) -> float:
    # values may underflow to 0 long before the last radius; that is the limit
    lim = richardson3(1.0 - np.asarray(radii), np.asarray(values))
    return max(0.0, lim)


def boundedness_indicator(w: RadialWeight, phi: Node, grid=None, grid_size: int = 256) -> dict:
    """``sup_z (eta(phi(z)) - eta(z))`` over a polar grid, with its witness."""
    z = polar_grid(grid_size) if grid is None else np.asarray(grid, dtype=complex)
    lr = log_ratio(w, phi, z)
    i = int(np.argmax(lr))
    val = float(lr[i])
    return {"log_sup": val, "argmax": complex(z[i]), "bounded": bool(math.isfinite(val))}


def compactness_profile(w: RadialWeight, phi: Node, zeta: complex, radii=None) -> RayProfile:
    r = default_ray_radii() if radii is None else np.asarray(radii, dtype=float)
    zeta = complex(zeta) / abs(zeta)
    vals = np.exp(log_ratio(w, phi, r * zeta))
    return RayProfile(zeta, r, vals, _limit(r, vals))


def compactness_verdict(w: RadialWeight, phi: Node, rays=None, radii=None,
                        grid_size: int = 256) -> dict:
    rays = default_rays() if rays is None else rays
    profiles = [compactness_profile(w, phi, z, radii) for z in rays]
    sup = math.exp(boundedness_indicator(w, phi, grid_size=grid_size)["log_sup"])
    limits = np.array([p.extrapolated_limit for p in profiles])
    return {"profiles": profiles, "grid_sup": sup, "limsup": float(limits.max()),
            "compact": bool(np.all(limits < COMPACT_TOL * (1.0 + sup)))}


@dataclass(frozen=True)
class FunctionalValue:
    value: float
    lower: float
    upper: float


def difference_functional(w: RadialWeight, phi: Node, psi: Node, z,
                          resolution: int = DEFAULT_RESOLUTION) -> FunctionalValue:
    """``rho(phi(z), psi(z))**2 * (omega(z)/omega(phi(z)) + omega(z)/omega(psi(z)))``."""
    z = complex(z)
    ratio = float(np.exp(log_ratio(w, phi, z)) + np.exp(log_ratio(w, psi, z)))
    rho = rho_maps(w, phi, psi, z, resolution)
    return FunctionalValue(rho.value ** 2 * ratio, rho.lower ** 2 * ratio, rho.upper ** 2 * ratio)


@dataclass(frozen=True, eq=False)
class DifferenceProfile:
    profiles: list
    grid_sup: float
    bounded_evidence: bool
    compact_evidence: bool

    def to_dict(self) -> dict:
        return {"profiles": [p.to_dict() for p in self.profiles], "grid_sup": self.grid_sup,
                "difference_bounded_evidence": self.bounded_evidence,
                "difference_compact_evidence": self.compact_evidence}


def difference_profile(w: RadialWeight, phi: Node, psi: Node, rays=None, radii=None,
                       resolution: int = DEFAULT_RESOLUTION) -> DifferenceProfile:
    rays = default_rays() if rays is None else rays
    r = default_ray_radii() if radii is None else np.asarray(radii, dtype=float)
    profiles = []
    for zeta in rays:
        zeta = complex(zeta) / abs(zeta)
        vals = np.array([difference_functional(w, phi, psi, x * zeta, resolution).value for x in r])
        profiles.append(RayProfile(zeta, r, vals, _limit(r, vals)))
    sup = float(max(np.max(p.values) for p in profiles))
    limits = np.array([p.extrapolated_limit for p in profiles])
    return DifferenceProfile(profiles, sup, bool(math.isfinite(sup)),
                             bool(np.all(limits < COMPACT_TOL * (1.0 + sup))))


class _NotApplicable:
    """Returned when no sample has ``rho`` close to one."""

    def __repr__(self):
        return "NotApplicable"

    def __bool__(self):
        return False


NotApplicable = _NotApplicable()


def lower_bound_diff_norm(w: RadialWeight, phi: Node, psi: Node, samples=None,
                          threshold: float = RHO_NEAR_ONE,
                          resolution: int = DEFAULT_RESOLUTION):
    """Largest ``omega(z)/omega(phi(z)) + omega(z)/omega(psi(z))`` among samples with ``rho > threshold``."""
    if samples is None:
        samples = polar_grid(32, r_out=1.0 - 1e-4)
    samples = np.asarray(samples, dtype=complex).ravel()
    best = None
    for z in samples:
        rho = rho_maps(w, phi, psi, z, resolution).value
        if rho > threshold:
            s = float(np.exp(log_ratio(w, phi, z)) + np.exp(log_ratio(w, psi, z)))
            best = s if best is None else max(best, s)
    return NotApplicable if best is None else best


@dataclass(frozen=True)
class CarlesonEstimate:
    ratio: float
    std_error: float
    hits: int
    n_samples: int

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "std_error": self.std_error, "hits": self.hits,
                "n_samples": self.n_samples}


def _plane_function(u):
    if u is None:
        return lambda z: np.ones_like(z)
    if isinstance(u, Node):
        return lambda z: np.asarray(evaluate(u, z), dtype=complex)
    if callable(u):
        return u
    c = complex(u)
    return lambda z: np.full_like(z, c)


def carleson_box_ratio(w: RadialWeight, u, phi: Node, p: float, xi: complex, delta: float,
                       n_samples: int = 1_000_000, seed: int = 0,
                       chunk: int = 200_000) -> CarlesonEstimate:
    """Monte Carlo estimate of ``mu(D(xi, delta*tau(xi))) / tau(xi)**2`` for the pull-back measure
    ``|u|^p (omega/omega o phi)^p dA`` under ``phi``.

    Samples are uniform in the disk from a counter-based generator, so a given
    ``seed`` reproduces the estimate regardless of chunking.
    """
    if not 0 < delta <= w.m_tau:
        raise ValueError(f"delta must lie in (0, m_tau={w.m_tau:.4g}]")
    if not p > 0:
        raise ValueError("p must be positive")
    uf = _plane_function(u)
    xi = complex(xi)
    if not abs(xi) < 1:
        raise ValueError("xi must lie inside the unit disk")
    t = float(w.tau(abs(xi)))
    rad = delta * t
    rng = np.random.Generator(np.random.Philox(seed))
    s1 = s2 = 0.0
    hits = 0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        u = rng.random((k, 2))
        z = np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])
        img = np.asarray(evaluate(phi, z), dtype=complex)
        inside = np.abs(img - xi) < rad
        vals = np.zeros(k)
        if inside.any():
            zi = z[inside]
            lr = w.eta(np.abs(img[inside])) - w.eta(np.abs(zi))
            vals[inside] = np.abs(uf(zi)) ** p * np.exp(p * lr)
        hits += int(np.count_nonzero(vals))
        s1 += float(vals.sum())
        s2 += float((vals ** 2).sum())
        done += k
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean ** 2, 0.0)
    se = math.sqrt(var / n_samples)
    if hits == 0:
        # no hits: one-sided 95% bound on the hit probability
        se = 3.0 / n_samples
    return CarlesonEstimate(mean / t ** 2, se / t ** 2, hits, n_samples)


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    boundedness: dict
    compactness: dict
    difference: DifferenceProfile | None
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(d):
            out = {}
            for k, v in d.items():
                if isinstance(v, complex):
                    out[k] = [v.real, v.imag]
                elif isinstance(v, list):
                    out[k] = [x.to_dict() if hasattr(x, "to_dict") else x for x in v]
                else:
                    out[k] = v
            return out
        return {
            "boundedness": {k: clean(v) for k, v in self.boundedness.items()},
            "compactness": {k: clean(v) for k, v in self.compactness.items()},
            "difference": None if self.difference is None else self.difference.to_dict(),
            "verdicts": self.verdicts,
        }


def diagnose(w: RadialWeight, maps: dict, pair: Sequence[str] | None = None,
             rays=None, radii=None, resolution: int = DEFAULT_RESOLUTION) -> DiagnosticsReport:
    """Run the boundedness/compactness scans on each named map and, if ``pair``
    names two of them, the difference profile."""
    bnd, cmp_, verdicts = {}, {}, {}
    for name, m in maps.items():
        bnd[name] = boundedness_indicator(w, m)
        cmp_[name] = compactness_verdict(w, m, rays, radii)
        verdicts[f"{name}.bounded"] = bnd[name]["bounded"]
        verdicts[f"{name}.compact"] = cmp_[name]["compact"]
    diff = None
    if pair is not None:
        a, b = pair
        diff = difference_profile(w, maps[a], maps[b], rays, radii, resolution)
        verdicts["difference.bounded"] = diff.bounded_evidence
        verdicts["difference.compact"] = diff.compact_evidence
    return DiagnosticsReport(bnd, cmp_, diff, verdicts)
