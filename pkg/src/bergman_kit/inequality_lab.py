"""Empirical constants for the comparability inequalities of the theory.

Each probe draws a seeded scrambled-Sobol sample, evaluates a ratio whose
boundedness (above or below) is the inequality, and records the extremal
value with its witness.  The probe is rerun with twice the samples, a finer
metric resolution and (for the tau-only probes) a deeper boundary layer; a
probe passes when its constants are finite, on the right side of any fixed
bound, and move by less than 20% under that refinement.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import kernel as kern
from .errors import InsufficientSamples
from .metric import DEFAULT_R, DEFAULT_RESOLUTION, distance_batch, geodesic_distance
from .weights import RadialWeight

DRIFT_LIMIT = 0.2
MIN_VALID = 50
KERNEL_R_MAX = 0.995
METRIC_R_MAX = 1.0 - 1e-6
SIGMA = 0.5
POLY_DEGREE = 30
DEFAULT_COUNT = 200


class ProbeId(str, Enum):
    LIPSCHITZ_TAU = "LIPSCHITZ_TAU"
    EQUIQUAN = "EQUIQUAN"
    KERNEL_UPPER = "KERNEL_UPPER"
    KERNEL_LOWER = "KERNEL_LOWER"
    ESTIMATE_2_3 = "ESTIMATE_2_3"
    LEMMA_2_1 = "LEMMA_2_1"
    SUBMEAN_1 = "SUBMEAN_1"
    SUBMEAN_2 = "SUBMEAN_2"
    DIFF_SUBMEAN = "DIFF_SUBMEAN"
    LOWERDS = "LOWERDS"
    RHO_VS_S = "RHO_VS_S"
    KERNEL_DIFF_EQUIV = "KERNEL_DIFF_EQUIV"
    INTERP_RHO = "INTERP_RHO"


@dataclass(frozen=True)
class SampleSpec:
    count: int = DEFAULT_COUNT
    r_max: float | None = None      # None: the probe's own default
    seed: int = 0

    def to_dict(self) -> dict:
        return {"count": self.count, "r_max": self.r_max, "seed": self.seed}


@dataclass
class ProbeReport:
    id: ProbeId
    sample_spec: dict
    direction: str
    constants: dict
    refined_constants: dict
    refinement_drift: dict
    witnesses: dict
    valid_samples: int
    passed: bool
    notes: str = ""
    bounds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id.value, "sample_spec": self.sample_spec, "direction": self.direction,
                "constants": self.constants, "refined_constants": self.refined_constants,
                "refinement_drift": self.refinement_drift, "witnesses": self.witnesses,
                "valid_samples": self.valid_samples, "bounds": self.bounds,
                "status": "PASS" if self.passed else "FAIL", "notes": self.notes}


# -- sampling ---------------------------------------------------------------------

def _sobol(dim: int, n: int, seed: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")   # balance warning for n not a power of two
        return qmc.Sobol(dim, scramble=True, seed=seed).random(n)


def _radius(u, g_lo):
    """Radii with ``1 - r`` log-uniform on ``[g_lo, 1]``."""
    return 1.0 - g_lo ** u


def _point(u_r, u_t, g_lo):
    return _radius(u_r, g_lo) * np.exp(2j * np.pi * u_t)


class _Context:
    def __init__(self, w: RadialWeight, spec: SampleSpec):
        self.w = w
        self.spec = spec
        self._table = None
        self._r_kernel = None
        self.R = DEFAULT_R

    @property
    def table(self):
        if self._table is None:
            self._table = kern.cached_moments(self.w)
        return self._table

    @property
    def r_kernel(self) -> float:
        if self._r_kernel is None:
            wr = kern.cached_working_radius(self.w)
            r = min(KERNEL_R_MAX, wr - 1e-3)
            self._r_kernel = r if self.spec.r_max is None else min(r, self.spec.r_max)
        return self._r_kernel

    def distance(self, a, b, resolution):
        # shared between probes: the pair sample depends only on (weight, seed, n)
        key = (self.w, a.tobytes(), b.tobytes(), resolution)
        if key not in _DIST_CACHE:
            if len(_DIST_CACHE) > 64:
                _DIST_CACHE.clear()
            _DIST_CACHE[key] = distance_batch(self.w, a, b, resolution)[1]
        return _DIST_CACHE[key]


_DIST_CACHE: dict = {}


def _pair_bank(ctx: _Context, n: int, r_max: float | None = None):
    """Half local pairs (offset 0.01..5 tau), half independent pairs, inside ``r_kernel``.

    Every fourth base point comes from the core ``|z| < 1/2`` (radius ``u**2 / 2``)
    so interior maxima are resolved as well as boundary ones.
    """
    u = _sobol(6, n, ctx.spec.seed)
    r_max = ctx.r_kernel if r_max is None else r_max
    g_lo = 1.0 - r_max
    core = np.arange(n) % 4 == 2
    z = np.where(core, 0.5 * u[:, 0] ** 2 * np.exp(2j * np.pi * u[:, 1]),
                 _point(u[:, 0], u[:, 1], g_lo))
    tz = ctx.w.tau(np.abs(z))
    off = tz * 10.0 ** (-2.0 + 2.7 * u[:, 2]) * np.exp(2j * np.pi * u[:, 3])
    local = z + off
    indep = _point(u[:, 4], u[:, 5], g_lo)
    w2 = np.where(np.arange(n) % 2 == 0, local, indep)
    big = np.abs(w2) > r_max
    w2 = np.where(big, w2 * (r_max * (1.0 - 1e-15)) / np.where(big, np.abs(w2), 1.0), w2)
    keep = w2 != z
    return z[keep], w2[keep]


def _poly_bank(n: int, seed: int):
    """Random complex polynomials (degree <= 30, padded coefficients) and exponents p in {1, 2}.

    Coefficients are taken in the local variable ``(xi - z) / radius`` of the
    averaging disk, so every monomial has unit size on its boundary.
    """
    # drawn in blocks keyed by (seed, block) so a larger sample extends a smaller one
    block = 64
    coef = np.empty((0, POLY_DEGREE + 1), dtype=complex)
    deg = np.empty(0, dtype=int)
    for b in range(-(-n // block)):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, b])))
        # low degrees weighted up: the extremal test functions are nearly linear
        d = np.floor((POLY_DEGREE + 1) * rng.random(block) ** 3).astype(int)
        c = (rng.standard_normal((block, POLY_DEGREE + 1))
             + 1j * rng.standard_normal((block, POLY_DEGREE + 1)))
        deg = np.concatenate([deg, d])
        coef = np.concatenate([coef, c])
    deg, coef = deg[:n], coef[:n]
    coef[np.arange(POLY_DEGREE + 1)[None, :] > deg[:, None]] = 0.0
    p = np.where(np.arange(n) % 2 == 0, 1.0, 2.0)
    return coef, p


def _polyval(coef, z):
    """Evaluate row-wise polynomials ``coef[k]`` at points ``z[k, ...]``."""
    out = np.zeros(np.shape(z), dtype=complex)
    for j in range(coef.shape[1] - 1, -1, -1):
        out = out * z + coef[:, j].reshape((-1,) + (1,) * (np.ndim(z) - 1))
    return out


_GL_R = np.polynomial.legendre.leggauss(32)
_N_ANG = 64


def _disk_nodes(centre, radius):
    """Quadrature on ``D(centre, radius)``: local nodes, points and log weights (normalized area)."""
    x, wx = _GL_R
    s = 0.5 * (x + 1.0)
    th = 2.0 * np.pi * (np.arange(_N_ANG) + 0.5) / _N_ANG
    loc = (s[:, None] * np.exp(1j * th)[None, :]).ravel()
    lw = np.log((s * wx)[:, None] * np.ones(_N_ANG) / _N_ANG).ravel()
    xi = centre[:, None] + radius[:, None] * loc[None, :]
    return loc, xi, lw[None, :] + 2.0 * np.log(radius)[:, None]


def _lse(a, axis=-1):
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def _log_disk_integral(w, coef, p, centre, radius):
    """``log int_{D(centre, radius)} |f|^p exp(-p eta) dA`` (normalized area) per row,
    ``f`` given in the local variable ``(xi - centre) / radius``."""
    loc, xi, lw = _disk_nodes(centre, radius)
    f = _polyval(coef, np.broadcast_to(loc, xi.shape))
    with np.errstate(divide="ignore"):
        return _lse(p[:, None] * (np.log(np.abs(f)) - w.eta(np.abs(xi))) + lw)


def _ascend(coef, a, vand, logw, p, maxiter=200):
    """Maximize ``|a.c|^p / sum_j exp(logw_j) |vand_j.c|^p`` over coefficients ``c``.

    The remaining factors of each ratio do not depend on ``c``, so this is the
    whole optimization for fixed points.
    """
    n = coef.size

    def fg(x):
        c = x[:n] + 1j * x[n:]
        lin = a @ c
        g = vand @ c
        ag = np.maximum(np.abs(g), 1e-300)
        e = p * np.log(ag) + logw
        den = _lse(e)
        pi = np.exp(e - den)
        al = max(abs(lin), 1e-300)
        t_num = np.conj(lin) * a / al ** 2
        t_den = (pi * np.conj(g) / ag ** 2) @ vand
        gr = p * (t_num - t_den)
        val = -(p * math.log(al) - den)
        return val, -np.concatenate([gr.real, -gr.imag])

    x0 = np.concatenate([coef.real, coef.imag])
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        res = minimize(fg, x0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    c = res.x[:n] + 1j * res.x[n:]
    scale = np.max(np.abs(c))
    if not (np.all(np.isfinite(c)) and scale > 0):
        return coef
    return c / scale


def _polish(ctx, s, res, ratios, mode):
    """Refine every random polynomial of a sample by local ascent.

    Each sample is polished on its own, so a larger sample still contains the
    polished members of a smaller one.
    """
    w = ctx.w
    deg = np.arange(POLY_DEGREE + 1)
    for i in range(s["z"].shape[0]):
        z, p = s["z"][i:i + 1], float(s["p"][i])
        rad = _RADIUS_FACTOR[mode] * (w.m_tau / 2.0) * w.tau(np.abs(z))
        loc, xi, lw = _disk_nodes(z, rad)
        vand = loc[:, None] ** deg[None, :]
        logw = lw[0] - p * w.eta(np.abs(xi[0]))
        if mode == "value":
            a = (deg == 0).astype(complex)
        elif mode == "derivative":
            a = (deg == 1).astype(complex)
        else:
            a = ((s["w"][i] - z[0]) / rad[0]) ** deg
            a[0] = 0.0
        s["coef"][i] = _ascend(s["coef"][i], a, vand, logw, p)
    return s


_RADIUS_FACTOR = {"value": 1.0, "derivative": 1.0, "difference": 6.0}


def _log_rho(d):
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-np.asarray(d)))


# -- probes -------------------------------------------------------------------------
# each probe: sample(ctx, n, level) -> dict of arrays; ratios(ctx, s, res) -> dict
# name -> (kind, array); kind is "max" or "min"

def _tau_depth(level):
    return 2.0 ** (-20.0 * (level + 1))


def _s_lipschitz(ctx, n, level):
    u = _sobol(4, n, ctx.spec.seed)
    g_lo = _tau_depth(level)
    z = _point(u[:, 0], u[:, 1], g_lo)
    gap = 1.0 - np.abs(z)
    off = 0.5 * gap * 10.0 ** (-3.0 * u[:, 2]) * np.exp(2j * np.pi * u[:, 3])
    return {"z": z, "w": z + off}


def _r_lipschitz(ctx, s, res):
    w = ctx.w
    z, v = s["z"], s["w"]
    q = np.abs(w.tau(np.abs(z)) - w.tau(np.abs(v))) / np.abs(z - v)
    return {"lipschitz": ("max", q)}


def _s_equiquan(ctx, n, level):
    u = _sobol(4, n, ctx.spec.seed)
    z = _point(u[:, 0], u[:, 1], _tau_depth(level))
    delta = ctx.w.m_tau / 2.0
    off = delta * ctx.w.tau(np.abs(z)) * np.sqrt(u[:, 2]) * np.exp(2j * np.pi * u[:, 3])
    return {"z": z, "w": z + off}


def _r_equiquan(ctx, s, res):
    q = ctx.w.tau(np.abs(s["w"])) / ctx.w.tau(np.abs(s["z"]))
    return {"ratio_max": ("max", q), "ratio_min": ("min", q)}


def _s_pairs(ctx, n, level):
    z, w2 = _pair_bank(ctx, n)
    return {"z": z, "w": w2}


def _log_kernel_weighted(ctx, z, v):
    """``log(|K(z,w)| omega(z) omega(w) tau(z) tau(w))``."""
    w = ctx.w
    scale, mant = kern.log_kernel_cross(ctx.table, z, v)
    return (scale + np.log(np.abs(mant)) - w.eta(np.abs(z)) - w.eta(np.abs(v))
            + np.log(w.tau(np.abs(z))) + np.log(w.tau(np.abs(v))))


def _r_kernel_upper(ctx, s, res):
    d = ctx.distance(s["z"], s["w"], res)
    lk = _log_kernel_weighted(ctx, s["z"], s["w"])
    return {"C_prime": ("max", np.exp(lk + SIGMA * d))}


def _s_short(ctx, n, level):
    """Pairs at offsets ``0.01..1`` times ``R tau(z)``; most land inside ``d < R``."""
    u = _sobol(4, n, ctx.spec.seed)
    g_lo = 1.0 - ctx.r_kernel
    core = np.arange(n) % 4 == 2
    z = np.where(core, 0.5 * u[:, 0] ** 2 * np.exp(2j * np.pi * u[:, 1]),
                 _point(u[:, 0], u[:, 1], g_lo))
    off = ctx.R * ctx.w.tau(np.abs(z)) * 10.0 ** (-2.0 + 2.0 * u[:, 2])
    v = z + off * np.exp(2j * np.pi * u[:, 3])
    keep = np.abs(v) < ctx.r_kernel
    return {"z": z[keep], "w": v[keep]}


def _short(ctx, s, res):
    d = ctx.distance(s["z"], s["w"], res)
    return d < ctx.R, d


def _r_kernel_lower(ctx, s, res):
    mask, d = _short(ctx, s, res)
    lk = _log_kernel_weighted(ctx, s["z"], s["w"])
    return {"C_double_prime": ("min", np.where(mask, np.exp(lk), np.nan))}


def _s_estimate(ctx, n, level):
    # no kernel involved, so pairs may go as deep as the metric allows; the
    # supremum sits where e^(-d) balances the power of 1/tau
    r = METRIC_R_MAX if ctx.spec.r_max is None else min(ctx.spec.r_max, METRIC_R_MAX)
    z, w2 = _pair_bank(ctx, n, r)
    return {"z": z, "w": w2}


def _r_estimate(ctx, s, res):
    w = ctx.w
    d = ctx.distance(s["z"], s["w"], res)
    tmin = np.minimum(w.tau(np.abs(s["z"])), w.tau(np.abs(s["w"])))
    lq = np.log(np.abs(s["z"] - s["w"]) / tmin)
    return {"C_M2": ("max", np.exp(-d + 2.0 * lq)), "C_M6": ("max", np.exp(-d + 6.0 * lq))}


def _polish_estimate(ctx, s, res, top=2):
    """Append locally maximized pairs for each ESTIMATE_2_3 constant.

    Both the distance and ``|z - w|`` are rotation invariant, so the search runs
    over the two log-gaps and the angle between the points.
    """
    w = ctx.w
    # margin keeps rotated points inside METRIC_R_MAX despite rounding
    g_lo = math.log(1.0 - METRIC_R_MAX) + 1e-6
    vals = _r_estimate(ctx, s, res)
    new_z, new_w = [], []
    for name, power in (("C_M2", 2.0), ("C_M6", 6.0)):
        arr = np.nan_to_num(vals[name][1], nan=-np.inf)
        for i in np.argsort(arr)[::-1][:top]:
            z, v = complex(s["z"][i]), complex(s["w"][i])
            x0 = np.array([math.log(1.0 - abs(z)), math.log(1.0 - abs(v)),
                           abs(np.angle(v * np.conj(z)))])

            def neg(x):
                a, b = np.clip(x[:2], g_lo, 0.0)
                p1, p2 = -math.expm1(a), -math.expm1(b) * np.exp(1j * x[2])
                if p1 == p2:
                    return 0.0
                d = geodesic_distance(w, p1, p2, res, check=False).estimate
                tmin = min(float(w.tau(abs(p1))), float(w.tau(abs(p2))))
                return d - power * math.log(abs(p1 - p2) / tmin)

            r = minimize(neg, x0, method="Nelder-Mead",
                         options={"maxfev": 100, "xatol": 1e-4, "fatol": 1e-6})
            a, b = np.clip(r.x[:2], g_lo, 0.0)
            new_z.append(-math.expm1(a))
            new_w.append(-math.expm1(b) * np.exp(1j * r.x[2]))
    return {"z": np.concatenate([s["z"], np.array(new_z, dtype=complex)]),
            "w": np.concatenate([s["w"], np.array(new_w, dtype=complex)])}


def _r_lemma21(ctx, s, res):
    mask, d = _short(ctx, s, res)
    w = ctx.w
    tmin = np.minimum(w.tau(np.abs(s["z"])), w.tau(np.abs(s["w"])))
    q = d * tmin / np.abs(s["z"] - s["w"])
    return {"C1": ("min", np.where(mask, q, np.nan))}


def _s_submean(ctx, n, level):
    u = _sobol(2, n, ctx.spec.seed)
    z = _point(u[:, 0], u[:, 1], 1.0 - ctx.r_kernel)
    coef, p = _poly_bank(n, ctx.spec.seed)
    return {"z": z, "coef": coef, "p": p}


def _r_submean(ctx, s, res, derivative=False):
    w = ctx.w
    z, coef, p = s["z"], s["coef"], s["p"]
    t = w.tau(np.abs(z))
    rad = (w.m_tau / 2.0) * t
    li = _log_disk_integral(w, coef, p, z, rad)
    # value or derivative at the centre, where the local variable vanishes
    fz = coef[:, 1] / rad if derivative else coef[:, 0]
    with np.errstate(divide="ignore"):
        lf = p * (np.log(np.abs(fz)) - w.eta(np.abs(z)))
    lt = (2.0 + (p if derivative else 0.0)) * np.log(t)
    q = np.exp(lf + lt - li)
    return {"C_p1": ("max", np.where(p == 1.0, q, np.nan)),
            "C_p2": ("max", np.where(p == 2.0, q, np.nan))}


def _r_submean2(ctx, s, res):
    return _r_submean(ctx, s, res, derivative=True)


def _s_diff_submean(ctx, n, level):
    u = _sobol(4, n, ctx.spec.seed)
    w = ctx.w
    z = _point(u[:, 0], u[:, 1], 1.0 - ctx.r_kernel)
    delta = w.m_tau / 2.0
    v = z + delta * w.tau(np.abs(z)) * np.sqrt(u[:, 2]) * np.exp(2j * np.pi * u[:, 3])
    swap = np.abs(v) > np.abs(z)
    z, v = np.where(swap, v, z), np.where(swap, z, v)
    coef, p = _poly_bank(n, ctx.spec.seed)
    keep = z != v
    return {"z": z[keep], "w": v[keep], "coef": coef[keep], "p": p[keep]}


def _r_diff_submean(ctx, s, res):
    w = ctx.w
    z, v, coef, p = s["z"], s["w"], s["coef"], s["p"]
    t = w.tau(np.abs(z))
    rad = 6.0 * (w.m_tau / 2.0) * t
    li = _log_disk_integral(w, coef, p, z, rad)
    d = ctx.distance(z, v, res)
    fd = _polyval(coef, ((v - z) / rad)[:, None])[:, 0] - coef[:, 0]
    with np.errstate(divide="ignore"):
        lf = p * (np.log(np.abs(fd)) - w.eta(np.abs(z)))
    q = np.exp(lf + 2.0 * np.log(t) - li - p * _log_rho(d))
    return {"C_p1": ("max", np.where(p == 1.0, q, np.nan)),
            "C_p2": ("max", np.where(p == 2.0, q, np.nan))}


def candidate_ratio(t: kern.MomentTable, z, v):
    """``|f(z)| / (||f|| sqrt(K(z,z)))`` for ``f(xi) = omega(z) K(xi, z) (xi - v)``.

    ``f`` has coefficients ``a_m = conj(z)^(m-1) / mu_{m-1} - v conj(z)^m / mu_m``,
    so ``||f||^2 = omega(z)^2 sum_m |a_m|^2 mu_m``; ``omega(z)`` cancels.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    lmu = t.log_mu
    out = np.empty(z.shape[0])
    lk = kern.log_kernel_diag(t, z)
    m = np.arange(1, lmu.shape[0])
    for k in range(z.shape[0]):
        if z[k] == v[k]:
            out[k] = 0.0
            continue
        r = abs(z[k])
        rat = np.exp(lmu[m - 1] - lmu[m])
        with np.errstate(divide="ignore"):
            lr = math.log(r) if r > 0 else -np.inf
            lterm = ((2.0 * m - 2.0) * lr + lmu[m] - 2.0 * lmu[m - 1]
                     + 2.0 * np.log(np.abs(1.0 - v[k] * np.conj(z[k]) * rat)))
        if r == 0:
            lterm = np.where(m == 1, lmu[1] - 2.0 * lmu[0], -np.inf)
        with np.errstate(divide="ignore"):
            l0 = 2.0 * math.log(abs(v[k])) - lmu[0] if v[k] != 0 else -np.inf
        allt = np.concatenate([[l0], lterm])
        mx = np.max(allt)
        lnorm2 = mx + math.log(np.sum(np.exp(allt - mx)))
        out[k] = math.exp(0.5 * lk[k] + math.log(abs(z[k] - v[k])) - 0.5 * lnorm2)
    return out


def _r_lowerds(ctx, s, res):
    mask, d = _short(ctx, s, res)
    z, v = s["z"][mask], s["w"][mask]
    q = np.full(s["z"].shape, np.nan)
    if z.size:
        S = kern.skwarczynski(ctx.table, z, v)
        q[mask] = candidate_ratio(ctx.table, z, v) / S
    return {"candidate_over_S": ("max", q)}


def _r_rho_vs_s(ctx, s, res):
    d = ctx.distance(s["z"], s["w"], res)
    S = kern.skwarczynski(ctx.table, s["z"], s["w"])
    return {"C3": ("max", -np.expm1(-d) / S)}


def _r_kdiff(ctx, s, res):
    d = ctx.distance(s["z"], s["w"], res)
    q = kern.kernel_diff_ratio(ctx.table, s["z"], s["w"]) / np.expm1(-d) ** 2
    return {"band_max": ("max", q), "band_min": ("min", q)}


_ST = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])


def _s_interp(ctx, n, level):
    z, w2 = _pair_bank(ctx, max(MIN_VALID, n // 4))
    ss, tt = np.meshgrid(_ST, _ST, indexing="ij")
    sel = ss < tt
    s, t = ss[sel], tt[sel]
    zz = np.repeat(z, s.size)
    ww = np.repeat(w2, s.size)
    return {"z": zz, "w": ww, "s": np.tile(s, z.size), "t": np.tile(t, z.size)}


def _r_interp(ctx, s, res):
    z, v, a, b = s["z"], s["w"], s["s"], s["t"]
    zs, zt = (1 - a) * z + a * v, (1 - b) * z + b * v
    num = ctx.distance(zs, zt, res)
    den = ctx.distance(z, v, res)
    return {"C": ("max", np.expm1(-num) / np.expm1(-den))}


_PROBES = {
    ProbeId.LIPSCHITZ_TAU: (_s_lipschitz, _r_lipschitz, "upper"),
    ProbeId.EQUIQUAN: (_s_equiquan, _r_equiquan, "two-sided"),
    ProbeId.KERNEL_UPPER: (_s_pairs, _r_kernel_upper, "upper"),
    ProbeId.KERNEL_LOWER: (_s_short, _r_kernel_lower, "lower"),
    ProbeId.ESTIMATE_2_3: (_s_estimate, _r_estimate, "upper"),
    ProbeId.LEMMA_2_1: (_s_short, _r_lemma21, "lower"),
    ProbeId.SUBMEAN_1: (_s_submean, _r_submean, "upper"),
    ProbeId.SUBMEAN_2: (_s_submean, _r_submean2, "upper"),
    ProbeId.DIFF_SUBMEAN: (_s_diff_submean, _r_diff_submean, "upper"),
    ProbeId.LOWERDS: (_s_short, _r_lowerds, "upper"),
    ProbeId.RHO_VS_S: (_s_pairs, _r_rho_vs_s, "upper"),
    ProbeId.KERNEL_DIFF_EQUIV: (_s_pairs, _r_kdiff, "two-sided"),
    ProbeId.INTERP_RHO: (_s_interp, _r_interp, "upper"),
}

_POLISH_MODE = {ProbeId.SUBMEAN_1: "value", ProbeId.SUBMEAN_2: "derivative",
                ProbeId.DIFF_SUBMEAN: "difference"}

# fixed bounds a constant must respect in addition to stability
_BOUNDS = {
    (ProbeId.EQUIQUAN, "ratio_max"): ("<=", 2.0),
    (ProbeId.EQUIQUAN, "ratio_min"): (">=", 0.5),
    (ProbeId.LOWERDS, "candidate_over_S"): ("<=", math.sqrt(2.0) + 1e-9),
}


def _extract(samples, idx):
    out = {}
    for k, v in samples.items():
        x = v[idx]
        if np.iscomplexobj(x):
            out[k] = [float(x.real), float(x.imag)] if np.ndim(x) == 0 else \
                [[float(c.real), float(c.imag)] for c in x]
        else:
            out[k] = float(x) if np.ndim(x) == 0 else [float(c) for c in x]
    return out


def _evaluate(ctx, pid, n, level, res):
    sample, ratios, _ = _PROBES[pid]
    s = sample(ctx, n, level)
    if pid in _POLISH_MODE:
        s = _polish(ctx, s, res, ratios, _POLISH_MODE[pid])
    elif pid is ProbeId.ESTIMATE_2_3:
        s = _polish_estimate(ctx, s, res)
    vals = ratios(ctx, s, res)
    consts, wits, valid = {}, {}, None
    for name, (kind, arr) in vals.items():
        arr = np.asarray(arr, dtype=float)
        ok = ~np.isnan(arr)
        cnt = int(np.count_nonzero(ok))
        valid = cnt if valid is None else min(valid, cnt)
        if cnt == 0:
            consts[name] = float("nan")
            continue
        a = np.where(ok, arr, -np.inf if kind == "max" else np.inf)
        i = int(np.argmax(a) if kind == "max" else np.argmin(a))
        consts[name] = float(arr[i])
        wits[name] = {"kind": kind, "value": float(arr[i]), "sample": _extract(s, i)}
    return consts, wits, valid


def witness_sample(witness: dict) -> dict:
    """Turn a stored witness back into a one-element sample dictionary."""
    out = {}
    for k, v in witness["sample"].items():
        if k in ("z", "w"):
            out[k] = np.array([complex(v[0], v[1])])
        elif k == "coef":
            out[k] = np.array([[complex(a, b) for a, b in v]])
        else:
            out[k] = np.array([v])
    return out


def reevaluate_witness(w: RadialWeight, pid: ProbeId, name: str, witness: dict,
                       resolution: int = DEFAULT_RESOLUTION) -> float:
    ctx = _Context(w, SampleSpec())
    _, ratios, _ = _PROBES[ProbeId(pid)]
    return float(ratios(ctx, witness_sample(witness), resolution)[name][1][0])


def run_probe(w: RadialWeight, pid, spec: SampleSpec | None = None, seed: int | None = None,
              resolution: int = DEFAULT_RESOLUTION, R: float = DEFAULT_R) -> ProbeReport:
    pid = ProbeId(pid)
    spec = spec or SampleSpec()
    if seed is not None:
        spec = SampleSpec(spec.count, spec.r_max, seed)
    ctx = _Context(w, spec)
    ctx.R = R
    base, wits, valid = _evaluate(ctx, pid, spec.count, 0, resolution)
    if valid < MIN_VALID:
        raise InsufficientSamples(f"{pid.value}: only {valid} valid samples (need {MIN_VALID})")
    ref, _, _ = _evaluate(ctx, pid, 2 * spec.count, 1, 2 * resolution)
    drift = {}
    for k in base:
        b, r = base[k], ref[k]
        drift[k] = abs(r - b) / abs(b) if b != 0 and math.isfinite(b) and math.isfinite(r) else float("inf")
    passed = all(math.isfinite(v) for v in list(base.values()) + list(ref.values()))
    passed &= all(d < DRIFT_LIMIT for d in drift.values())
    direction = _PROBES[pid][2]
    if direction in ("lower", "two-sided"):
        lows = [k for k, (kind, _) in _kinds(pid).items() if kind == "min"]
        passed &= all(base[k] > 0 and ref[k] > 0 for k in lows)
    bounds = {}
    for (p, name), (op, lim) in _BOUNDS.items():
        if p is pid:
            ok = all((c[name] <= lim) if op == "<=" else (c[name] >= lim) for c in (base, ref))
            bounds[name] = {"op": op, "limit": lim, "satisfied": bool(ok)}
            passed &= ok
    sspec = spec.to_dict()
    sspec["r_max_used"] = ctx.r_kernel if pid not in (ProbeId.LIPSCHITZ_TAU, ProbeId.EQUIQUAN) \
        else 1.0 - _tau_depth(0)
    return ProbeReport(pid, sspec, direction, base, ref, drift, wits, valid, bool(passed),
                       bounds=bounds)


def _kinds(pid):
    kinds = {
        ProbeId.EQUIQUAN: {"ratio_max": ("max", None), "ratio_min": ("min", None)},
        ProbeId.KERNEL_LOWER: {"C_double_prime": ("min", None)},
        ProbeId.LEMMA_2_1: {"C1": ("min", None)},
        ProbeId.KERNEL_DIFF_EQUIV: {"band_max": ("max", None), "band_min": ("min", None)},
    }
    return kinds.get(pid, {})


@dataclass
class SuiteReport:
    seed: int
    reports: list
    passed: bool

    def to_dict(self) -> dict:
        return {"seed": self.seed, "summary": "PASS" if self.passed else "FAIL",
                "probes": [r.to_dict() for r in self.reports]}


def run_all(w: RadialWeight, seed: int = 0, count: int = DEFAULT_COUNT,
            resolution: int = DEFAULT_RESOLUTION, R: float = DEFAULT_R) -> SuiteReport:
    """Every probe with a shared seed; the pair sample is shared between probes."""
    reports = []
    for pid in ProbeId:
        try:
            reports.append(run_probe(w, pid, SampleSpec(count, None, seed), None, resolution, R))
        except InsufficientSamples as exc:
            reports.append(ProbeReport(pid, SampleSpec(count, None, seed).to_dict(),
                                       _PROBES[pid][2], {}, {}, {}, {}, 0, False, notes=str(exc)))
    return SuiteReport(seed, reports, all(r.passed for r in reports))
