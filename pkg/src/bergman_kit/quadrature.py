"""Radial and disk quadrature for the normalized area measure.

Radial rules are composite Gauss-Legendre on panels whose distance to the
boundary shrinks geometrically, so the rule follows the scale length of the
weight.  Nodes are stored together with their gap ``1 - r`` computed without
cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import InvalidRule, NonFiniteIntegrand, QuadratureUnderflow
from .weights import RadialWeight

DEFAULT_R_MAX = 1.0 - 1e-8
DEFAULT_PANELS = 480
DEFAULT_ORDER = 20


@dataclass(frozen=True, eq=False)
class RadialRule:
    nodes: np.ndarray
    weights: np.ndarray
    gaps: np.ndarray
    r_max: float
    panels: int
    order: int
    closed: bool

    @property
    def extent(self) -> float:
        """Upper end of the integration interval."""
        return 1.0 if self.closed else self.r_max


@dataclass(frozen=True, eq=False)
class DiskRule:
    radial: RadialRule
    n_theta: int = 64

    def __post_init__(self):
        if self.n_theta < 8 or self.n_theta % 2:
            raise InvalidRule(f"n_theta must be an even integer >= 8, got {self.n_theta}")

    def points(self):
        """Nodes ``z`` (shape radial x angular) and matching area weights."""
        th = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        r = self.radial.nodes
        z = r[:, None] * np.exp(1j * th)[None, :]
        wa = (2.0 * r * self.radial.weights)[:, None] / self.n_theta * np.ones((1, self.n_theta))
        return z, wa


@lru_cache(maxsize=8)
def _legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def build_radial_rule(panels: int = DEFAULT_PANELS, order: int = DEFAULT_ORDER,
                      r_max: float = DEFAULT_R_MAX, closed: bool = True) -> RadialRule:
    """Composite Gauss-Legendre rule on ``[0, r_max]`` (plus ``[r_max, 1]`` if closed).

    Panel ``k`` spans gaps ``(1 - r_max)**(k/panels)`` to ``(1 - r_max)**((k+1)/panels)``.
    """
    if not (0.0 < r_max < 1.0):
        raise InvalidRule(f"r_max must lie in (0, 1), got {r_max}")
    if panels < 1 or order < 2:
        raise InvalidRule(f"need panels >= 1 and order >= 2, got {panels}, {order}")
    gap_max = 1.0 - r_max
    edges = gap_max ** (np.arange(panels + 1) / panels)       # gaps, decreasing from 1
    if closed:
        edges = np.append(edges, 0.0)
    x, wx = _legendre(order)
    g_hi = edges[:-1, None]
    g_lo = edges[1:, None]
    half = 0.5 * (g_hi - g_lo)
    gaps = (0.5 * (g_hi + g_lo) - half * x[None, :]).ravel()
    weights = (half * wx[None, :]).ravel()
    order_idx = np.argsort(-gaps, kind="stable")
    gaps = gaps[order_idx]
    weights = weights[order_idx]
    return RadialRule(nodes=1.0 - gaps, weights=weights, gaps=gaps, r_max=r_max,
                      panels=panels, order=order, closed=closed)


def integrate_radial(g, rule: RadialRule) -> float:
    """``int_0^extent g(r) dr``."""
    vals = np.asarray(g(rule.nodes), dtype=float)
    return float(np.sum(rule.weights * vals))


def log_moment_table(w: RadialWeight, n_max: int, rule: RadialRule) -> np.ndarray:
    """``log mu_n`` for ``n = 0..n_max`` with ``mu_n = 2 int r^(2n+1) exp(-2 eta) dr``."""
    logr = np.log1p(-rule.gaps)
    m2eta = -2.0 * w.eta_from_gap(rule.gaps)
    out = _kernels.log_moments(logr, m2eta, rule.weights, n_max)
    if not np.all(np.isfinite(out)):
        bad = int(np.argmin(np.isfinite(out)))
        raise QuadratureUnderflow(f"moment {bad} underflows on every node")
    return out


def log_moment(w: RadialWeight, n: int, rule: RadialRule) -> float:
    if n < 0:
        raise InvalidRule(f"moment index must be >= 0, got {n}")
    return float(log_moment_table(w, n, rule)[n])


def integrate_disk(f, rule: DiskRule, estimate_error: bool = True):
    """Integrate ``f`` (vectorized over complex arrays) against normalized area.

    Returns ``(value, error_estimate)``.  The estimate is the larger change seen
    when doubling ``n_theta`` or adding two radial panels.
    """
    value = _disk_sum(f, rule)
    if not estimate_error:
        return value, float("nan")
    finer_theta = _disk_sum(f, DiskRule(rule.radial, 2 * rule.n_theta))
    rr = rule.radial
    more_panels = build_radial_rule(rr.panels + 2, rr.order, rr.r_max, rr.closed)
    finer_r = _disk_sum(f, DiskRule(more_panels, rule.n_theta))
    err = max(abs(finer_theta - value), abs(finer_r - value))
    return value, float(err)


def _disk_sum(f, rule: DiskRule):
    z, wa = rule.points()
    vals = np.asarray(f(z))
    if vals.shape != z.shape:
        vals = np.broadcast_to(vals, z.shape)
    finite = np.isfinite(vals)
    if not finite.all():
        i, j = np.unravel_index(np.argmin(finite), z.shape)
        raise NonFiniteIntegrand(complex(z[i, j]))
    total = np.sum(wa * vals)
    if np.iscomplexobj(total):
        return complex(total)
    return float(total)
