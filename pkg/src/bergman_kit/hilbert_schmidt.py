"""Hilbert-Schmidt quantities of (weighted) composition operators.

The HS quantity of ``T`` is stored as the sum ``sum_n ||T e_n||^2`` over an
orthonormal basis (field ``value``); its square root, the genuine norm, is
``HSReport.norm``.  Disk integrals are taken over ``|z| <= 1 - 2**-k`` for
increasing ``k``: each halving of the distance to the boundary adds one
"level".  Level contributions that stop shrinking mark a divergent integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernel as kern
from .errors import BoundaryEscape, IndeterminateRatio, TruncationInsufficient
from .holomap import Add, Const, Mul, Node, evaluate
from .metric import DEFAULT_RESOLUTION, distance_batch, geodesic_distance
from .weights import RadialWeight

# a level whose contribution is at least this fraction of the previous one is
# "not decaying"; two such levels in a row make the integral Infinite
STALL_RATIO = 0.95
STALL_COUNT = 2


@dataclass(frozen=True)
class HSRule:
    """Polar product rule organized in levels ``1 - r in [2**-k, 2**-(k-1)]``."""
    panels_per_level: int = 4
    order: int = 10
    n_theta: int = 64
    max_levels: int = 14

    def __post_init__(self):
        if self.n_theta < 8 or self.n_theta % 4:
            raise ValueError("n_theta must be a multiple of 4, at least 8")
        if self.panels_per_level < 1 or self.order < 4 or self.max_levels < 3:
            raise ValueError("panels_per_level >= 1, order >= 4, max_levels >= 3 required")

    def refined(self) -> "HSRule":
        return HSRule(self.panels_per_level * 2, self.order, self.n_theta * 2, self.max_levels)


@dataclass(frozen=True, eq=False)
class _Nodes:
    z: np.ndarray          # (levels, nodes_per_level)
    wa: np.ndarray         # area weights (normalized measure)
    gap: np.ndarray
    coarse: np.ndarray     # boolean mask of the half-angle sub-grid


@lru_cache(maxsize=16)
def _nodes(rule: HSRule, order: int) -> _Nodes:
    x, wx = np.polynomial.legendre.leggauss(order)
    m = rule.panels_per_level
    edges = 2.0 ** (-np.arange(rule.max_levels * m + 1) / m)   # gaps, decreasing
    hi, lo = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    g = 0.5 * (hi + lo) - half * x
    wr = half * wx
    g = g.reshape(rule.max_levels, m * order)
    wr = wr.reshape(rule.max_levels, m * order)
    th = 2.0 * np.pi * np.arange(rule.n_theta) / rule.n_theta
    r = 1.0 - g
    z = r[:, :, None] * np.exp(1j * th)
    wa = (2.0 * r * wr)[:, :, None] / rule.n_theta * np.ones(rule.n_theta)
    coarse = np.zeros(rule.n_theta, dtype=bool)
    coarse[::2] = True
    shape = (rule.max_levels, m * order * rule.n_theta)
    return _Nodes(z.reshape(shape), wa.reshape(shape),
                  np.repeat(g[:, :, None], rule.n_theta, axis=2).reshape(shape),
                  np.broadcast_to(coarse, z.shape).reshape(shape))


@dataclass(frozen=True)
class HSReport:
    value: float
    error_estimate: float
    method: str
    infinite: bool = False
    levels: tuple = ()
    convention: str = "sum of squared basis-image norms"
    extra: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        """Square root of ``value`` (the usual HS norm)."""
        return math.sqrt(self.value)

    def to_dict(self) -> dict:
        d = {"method": self.method, "value": self.value, "error_estimate": self.error_estimate,
             "infinite": self.infinite, "convention": self.convention,
             "sqrt_value": self.norm, "levels": list(self.levels)}
        d.update(self.extra)
        return d


INFINITE_VALUE = float("inf")


def _infinite(method, levels, extra=None) -> HSReport:
    return HSReport(INFINITE_VALUE, INFINITE_VALUE, method, True, tuple(levels), extra=extra or {})


def _level_sums(log_f, rule: HSRule, order: int, n_levels: int):
    """Per-level integrals of ``exp(log_f(z, gap))`` plus the half-angle version."""
    nd = _nodes(rule, order)
    full, half = [], []
    for k in range(n_levels):
        vals = np.exp(log_f(nd.z[k], nd.gap[k]))
        if not np.all(np.isfinite(vals)):
            raise BoundaryEscape(f"integrand not finite on level {k + 1}")
        full.append(float(np.sum(nd.wa[k] * vals)))
        half.append(float(2.0 * np.sum((nd.wa[k] * vals)[nd.coarse[k]])))
    return np.array(full), np.array(half)


def _assemble(method, log_f, rule, n_levels, extra=None) -> HSReport:
    """Sum levels, estimate quadrature error and decide finiteness."""
    full, half = _level_sums(log_f, rule, rule.order, n_levels)
    low, _ = _level_sums(log_f, rule, rule.order - 4, n_levels)
    total = float(full.sum())
    quad_err = float(max(abs(full.sum() - half.sum()), abs(full.sum() - low.sum())))
    levels = tuple(float(v) for v in full)
    # divergence test on the trailing levels
    ratios = full[1:] / np.where(full[:-1] > 0, full[:-1], np.inf)
    stalled = 0
    for q in ratios[::-1]:
        if q >= STALL_RATIO:
            stalled += 1
        else:
            break
    last = full[-1]
    if stalled >= STALL_COUNT and last > 1e-14 * max(total, 1e-300):
        return _infinite(method, levels, extra)
    q = ratios[-1] if ratios.size else 0.0
    q = min(q, STALL_RATIO) if np.isfinite(q) else 0.0
    tail = float(last * q / (1.0 - q))
    return HSReport(total, quad_err + tail, method, False, levels,
                    extra={**(extra or {}), "tail_estimate": tail, "quadrature_error": quad_err})


def _image_levels(w: RadialWeight, maps, rule: HSRule, radius: float) -> int:
    """Number of leading levels on which every image stays within ``radius``."""
    nd = _nodes(rule, rule.order)
    n = 0
    for k in range(rule.max_levels):
        zz = nd.z[k]
        if any(np.max(np.abs(evaluate(m, zz))) > radius for m in maps):
            break
        n += 1
    if n < 3:
        raise TruncationInsufficient(kern.LARGE_N_MAX * 10, kern.LARGE_N_MAX)
    return n


def _plane(u):
    if u is None:
        return None
    if isinstance(u, Node):
        return lambda z: np.asarray(evaluate(u, z), dtype=complex)
    if callable(u):
        return u
    c = complex(u)
    return lambda z: np.full(np.shape(z), c)


def _table(w, table):
    return table if table is not None else kern.cached_moments(w)


def _radius(w, table):
    if table is None:
        return kern.cached_working_radius(w)
    return table.working_radius()


def hs_weighted(w: RadialWeight, u, phi: Node, rule: HSRule | None = None,
                table: kern.MomentTable | None = None) -> HSReport:
    """HS quantity of ``u C_phi``: ``int |u|^2 K(phi, phi) omega^2 dA``."""
    rule = rule or HSRule()
    uf = _plane(u)
    if u is not None and not callable(u) and not isinstance(u, Node) and complex(u) == 0:
        return HSReport(0.0, 0.0, "integral")
    t = _table(w, table)
    n_lv = _image_levels(w, [phi], rule, _radius(w, table))

    def log_f(z, gap):
        img = np.asarray(evaluate(phi, z), dtype=complex) * np.ones_like(z)
        out = kern.log_kernel_diag(t, img) - 2.0 * w.eta_from_gap(gap)
        if uf is not None:
            with np.errstate(divide="ignore"):
                out = out + 2.0 * np.log(np.abs(uf(z)))
        return out

    return _assemble("integral", log_f, rule, n_lv)


def _same(phi, psi) -> bool:
    return phi == psi


def hs_difference(w: RadialWeight, phi: Node, psi: Node, rule: HSRule | None = None,
                  table: kern.MomentTable | None = None) -> HSReport:
    """``int ||K_phi(z) - K_psi(z)||^2 omega(z)^2 dA`` from the non-negative kernel series."""
    if _same(phi, psi):
        return HSReport(0.0, 0.0, "integral")
    rule = rule or HSRule()
    t = _table(w, table)
    n_lv = _image_levels(w, [phi, psi], rule, _radius(w, table))

    def log_f(z, gap):
        a = np.asarray(evaluate(phi, z), dtype=complex) * np.ones_like(z)
        b = np.asarray(evaluate(psi, z), dtype=complex) * np.ones_like(z)
        return kern.log_kernel_diff(t, a, b) - 2.0 * w.eta_from_gap(gap)

    return _assemble("integral", log_f, rule, n_lv)


def _basis_terms(w, log_mu, phi, psi, z, gap, n_max):
    """Per-node partial sums and per-degree contributions of ``|phi^n - psi^n|^2 / mu_n``."""
    a = np.asarray(evaluate(phi, z), dtype=complex) * np.ones_like(z)
    b = np.asarray(evaluate(psi, z), dtype=complex) * np.ones_like(z)
    lw = -2.0 * w.eta_from_gap(gap)
    d = np.zeros_like(a)           # a^0 - b^0
    bpow = np.ones_like(b)
    per_n = np.empty((n_max + 1, z.shape[0]))
    for n in range(n_max + 1):
        with np.errstate(divide="ignore"):
            per_n[n] = np.exp(2.0 * np.log(np.abs(d)) - log_mu[n] + lw)
        d = a * d + (a - b) * bpow
        bpow = bpow * b
    return per_n


def hs_difference_basis(w: RadialWeight, phi: Node, psi: Node, N: int = kern.DEFAULT_N_MAX,
                        rule: HSRule | None = None,
                        table: kern.MomentTable | None = None) -> HSReport:
    """``sum_{n <= N} int |e_n(phi) - e_n(psi)|^2 omega^2 dA`` with ``e_n = z^n / sqrt(mu_n)``.

    The degree tail is extrapolated from the last tenth of the terms with a
    power law and reported as ``degree_tail``.
    """
    if _same(phi, psi):
        return HSReport(0.0, 0.0, "basis_sum", extra={"degree_tail": 0.0, "terms": [0.0] * (N + 1)})
    rule = rule or HSRule()
    t = _table(w, table)
    if N > t.n_max:
        raise TruncationInsufficient(N, t.n_max)
    nd = _nodes(rule, rule.order)
    n_lv = rule.max_levels
    for k in range(rule.max_levels):
        if any(np.max(np.abs(evaluate(m, nd.z[k]))) >= 1.0 for m in (phi, psi)):
            n_lv = k
            break
    terms = np.zeros(N + 1)

    def log_f(z, gap):
        per_n = _basis_terms(w, t.log_mu, phi, psi, z, gap, N)
        with np.errstate(divide="ignore"):
            return np.log(per_n.sum(axis=0))

    # per-degree totals on the main rule
    for k in range(n_lv):
        per_n = _basis_terms(w, t.log_mu, phi, psi, nd.z[k], nd.gap[k], N)
        terms += per_n @ nd.wa[k]
    rep = _assemble("basis_sum", log_f, rule, n_lv)
    tail = _degree_tail(terms)
    extra = dict(rep.extra)
    extra.update({"degree_tail": tail, "terms": terms.tolist(), "N": N})
    if rep.infinite:
        return HSReport(rep.value, rep.error_estimate, "basis_sum", True, rep.levels, extra=extra)
    return HSReport(rep.value, rep.error_estimate + tail, "basis_sum", False, rep.levels, extra=extra)


def _degree_tail(terms: np.ndarray) -> float:
    n_max = terms.shape[0] - 1
    n = np.arange(max(1, int(0.9 * n_max)), n_max + 1)
    tt = terms[n]
    if np.all(tt == 0):
        return 0.0
    if np.any(tt <= 0):
        return float(tt.max() * (n_max - n[0] + 1))
    slope, icpt = np.polyfit(np.log(n), np.log(tt), 1)
    if slope >= -1.0:
        return float("inf")
    s = -slope
    return float(tt[-1] * n_max / (s - 1.0))


def hs_equiv_ratio(w: RadialWeight, phi: Node, psi: Node, rule: HSRule | None = None,
                   resolution: int = DEFAULT_RESOLUTION,
                   table: kern.MomentTable | None = None) -> dict:
    """``hs_difference`` divided by ``int rho(phi, psi)^2 (K(phi,phi) + K(psi,psi)) omega^2 dA``."""
    if _same(phi, psi):
        raise IndeterminateRatio("phi = psi: both integrals vanish")
    rule = rule or HSRule()
    num = hs_difference(w, phi, psi, rule, table)
    t = _table(w, table)
    n_lv = _image_levels(w, [phi, psi], rule, _radius(w, table))
    brackets = {}

    def log_den(which):
        def f(z, gap):
            a = np.asarray(evaluate(phi, z), dtype=complex) * np.ones_like(z)
            b = np.asarray(evaluate(psi, z), dtype=complex) * np.ones_like(z)
            key = (z.shape, float(np.abs(z).sum()))
            if key not in brackets:
                brackets[key] = distance_batch(w, a, b, resolution)
            d = brackets[key][which]
            with np.errstate(divide="ignore"):
                lrho = np.log(-np.expm1(-d))
            lk = np.logaddexp(kern.log_kernel_diag(t, a), kern.log_kernel_diag(t, b))
            return 2.0 * lrho + lk - 2.0 * w.eta_from_gap(gap)
        return f

    den = _assemble("integral", log_den(1), rule, n_lv)
    if num.infinite and den.infinite:
        raise IndeterminateRatio("both integrals are Infinite")
    if den.infinite:
        return {"ratio": 0.0, "numerator": num.to_dict(), "denominator": den.to_dict()}
    if num.infinite:
        return {"ratio": float("inf"), "numerator": num.to_dict(), "denominator": den.to_dict()}
    lo = _assemble("integral", log_den(0), rule, n_lv).value
    ratio = num.value / den.value
    # bracket of rho moves the denominator between lo and den.value
    err = ratio * (num.error_estimate / num.value + den.error_estimate / den.value
                   + (den.value - lo) / max(lo, 1e-300))
    return {"ratio": ratio, "error_estimate": err, "numerator": num.to_dict(),
            "denominator": den.to_dict()}


def hs_metric(w: RadialWeight, phi: Node, psi: Node, rule: HSRule | None = None,
              convention: str = "sum", table: kern.MomentTable | None = None) -> float:
    """``x / (1 + x)`` with ``x`` the HS quantity (``"sum"``) or its square root
    (``"sqrt"``); 1 when the difference is not Hilbert-Schmidt."""
    rep = hs_difference(w, phi, psi, rule, table)
    if rep.infinite:
        return 1.0
    x = rep.value if convention == "sum" else rep.norm
    if convention not in ("sum", "sqrt"):
        raise ValueError(f"unknown convention {convention!r}")
    return x / (1.0 + x)


def convex_combination(phi: Node, psi: Node, s: float) -> Node:
    """``(1 - s) phi + s psi`` as an expression tree."""
    s = float(s)
    if s == 0.0:
        return phi
    if s == 1.0:
        return psi
    return Add(Mul(Const(complex(1.0 - s)), phi), Mul(Const(complex(s)), psi))


def path_scan(w: RadialWeight, phi: Node, psi: Node, s_grid, rule: HSRule | None = None,
              table: kern.MomentTable | None = None) -> dict:
    """HS quantities of ``C_{phi_s} - C_{phi_t}`` for adjacent grid values ``s < t``."""
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly increasing")
    maps = [convex_combination(phi, psi, s) for s in s_grid]
    reports = [hs_difference(w, maps[i], maps[i + 1], rule, table) for i in range(len(maps) - 1)]
    values = [r.value for r in reports]
    norms = [r.norm for r in reports]
    return {"s_grid": s_grid.tolist(), "values": values, "sqrt_values": norms,
            "errors": [r.error_estimate for r in reports],
            "all_finite": bool(not any(r.infinite for r in reports)),
            "max_value": max(values) if values else 0.0,
            "max_sqrt_value": max(norms) if norms else 0.0}


def interp_rho_probe(w: RadialWeight, z, w2, s: float, t: float,
                     resolution: int = DEFAULT_RESOLUTION) -> float:
    """``rho(z_s, z_t) / rho(z, w2)`` with ``z_u = (1 - u) z + u w2``."""
    z, w2 = complex(z), complex(w2)
    if z == w2:
        raise ValueError("z and w2 must differ")
    if s == t:
        return 0.0
    zs, zt = (1 - s) * z + s * w2, (1 - t) * z + t * w2
    num = geodesic_distance(w, zs, zt, resolution, check=False).estimate
    den = geodesic_distance(w, z, w2, resolution, check=False).estimate
    return math.expm1(-num) / math.expm1(-den)
