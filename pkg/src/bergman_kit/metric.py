"""Distance of the conformal metric ``|dz| / tau(|z|)`` with two-sided brackets.

Upper bounds come from admissible polylines: the straight segment, and a
shortest path on a polar graph adapted to tau that is then relaxed vertex by
vertex.  The lower bound is a provable one for the radial metric: a path whose
smallest radius is ``rho`` must pay the radial climb from ``rho`` to both end
radii, the angle ``dtheta`` at speed at least ``rho / tau(rho)`` and the chord
at speed at least ``1 / tau(rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, sparse
from scipy.optimize import minimize
from scipy.sparse import csgraph

from .errors import BoundaryEscape, ResolutionTooCoarse
from .weights import RadialWeight

DEFAULT_RESOLUTION = 1
DEFAULT_R = 0.5
DEFAULT_R_MAX = 1.0 - 1e-6
BRACKET_LIMIT = 1.5
SMOOTHING_PASSES = 20
MAX_GRAPH_NODES = 400_000
MAX_PATH_VERTICES = 4096
MIN_VERTICES = 16
TIGHT_REL = 1e-7
SATURATED = 40.0
SHORT_DISTANCE = 0.5
REFINE_LEVELS = 1


@dataclass(frozen=True)
class MetricConfig:
    resolution: int = DEFAULT_RESOLUTION
    R: float = DEFAULT_R

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError(f"resolution must be a positive integer, got {self.resolution!r}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R!r}")


@dataclass(frozen=True, eq=False)
class GeodesicEstimate:
    lower: float
    estimate: float
    upper: float
    path: np.ndarray

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {"lower": self.lower, "estimate": self.estimate, "upper": self.upper,
                "path_vertices": int(self.path.shape[0])}


@dataclass(frozen=True)
class RhoEstimate:
    lower: float
    value: float
    upper: float

    def to_dict(self) -> dict:
        return {"lower": self.lower, "value": self.value, "upper": self.upper}


def _rho(d):
    return -math.expm1(-d)


@lru_cache(maxsize=4)
def _gl(order: int):
    x, wx = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * wx


def segment_distance(w: RadialWeight, z, w2) -> float:
    """Line integral of ``1/tau`` along the straight segment (adaptive, tol 1e-10)."""
    z, w2 = complex(z), complex(w2)
    length = abs(w2 - z)
    if length == 0.0:
        return 0.0
    f = lambda t: 1.0 / float(w.tau(abs(z + t * (w2 - z))))
    # breakpoints at the closest approach to the origin and geometric toward
    # endpoints near the boundary, where 1/tau peaks sharply
    t0 = -((z.conjugate() * (w2 - z)).real / length) / length
    pts = {t0}

    def ladder(h):
        h = min(max(h, 1e-15), 0.5)
        return h * 2.0 ** np.arange(0, math.ceil(math.log2(0.5 / h)))

    for tk in ladder((1.0 - abs(z)) / length):
        pts.add(tk)
    for tk in ladder((1.0 - abs(w2)) / length):
        pts.add(1.0 - tk)
    if 0.0 < t0 < 1.0:
        # |z| has a rounded corner of width ~dmin/length at the closest approach
        for tk in ladder(abs(z + t0 * (w2 - z)) / length):
            pts.update((t0 - tk, t0 + tk))
    pts = sorted(t for t in pts if 0.0 < t < 1.0)
    val, _ = integrate.quad(f, 0.0, 1.0, points=pts or None, epsabs=0.0, epsrel=1e-10,
                            limit=max(500, 4 * len(pts)))
    return length * val


def polyline_length(w: RadialWeight, pts, order: int = 16) -> float:
    """``sum over segments of int |dz| / tau`` by Gauss-Legendre per segment."""
    pts = np.asarray(pts, dtype=complex)
    if pts.shape[0] < 2:
        return 0.0
    return float(np.sum(_segments_split(w, pts[:-1], pts[1:], order)))


def _segments_split(w, a, b, order=16):
    """Segment costs, split where ``|z|`` has its kink (closest approach to 0)."""
    d = b - a
    dd = np.abs(d) ** 2
    t0 = np.clip(-(np.conj(a) * d).real / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    m = a + t0 * d
    return _segments(w, a, m, order) + _segments(w, m, b, order)


def _segments(w, a, b, order=8):
    x, wx = _gl(order)
    d = b - a
    z = a[..., None] + x * d[..., None]
    return np.abs(d) * np.sum(wx / w.tau(np.abs(z)), axis=-1)


def _angle_gap(z, w2):
    if z == 0 or w2 == 0:
        return 0.0
    d = abs(np.angle(z) - np.angle(w2))
    return min(d, 2.0 * math.pi - d)


def lower_bound(w: RadialWeight, z, w2, n_grid: int = 4000) -> float:
    """Provable lower bound for the distance between ``z`` and ``w2``.

    For a path with minimum radius ``rho``, write ``A(rho)`` for the radial
    climb, ``B(rho) = dtheta * rho / tau(rho)`` and ``E(rho) = |z - w2| / tau(rho)``;
    its length is at least ``max(hypot(A, B), E)``.  ``A`` decreases and ``B``,
    ``E`` increase in ``rho``, so pairing the right end of ``A`` with the left
    ends of ``B``, ``E`` on each grid cell keeps the minimum over ``rho`` a true
    lower bound.
    """
    z, w2 = complex(z), complex(w2)
    if z == w2:
        return 0.0
    r1, r2 = abs(z), abs(w2)
    rmin = min(r1, r2)
    dth = _angle_gap(z, w2)
    chord = abs(z - w2)
    umax = float(w.radial_distance(0.0, rmin))
    rho = np.asarray(w.radius_at_distance(0.0, np.linspace(0.0, umax, n_grid)), dtype=float)
    rho[-1] = rmin
    a = w.radial_distance(rho, r1) + w.radial_distance(rho, r2)
    t = w.tau(rho)
    b = dth * rho / t
    e = chord / t
    cell = np.maximum(np.hypot(a[1:], b[:-1]), e[:-1])
    last = max(math.hypot(a[-1], b[-1]), e[-1])
    return float(min(cell.min(), last))


# -- polar graph --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolarGraph:
    """Sector graph between two points; ring ``i`` has ``counts[i]`` nodes."""
    radii: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    theta0: float
    sweep: float          # signed angle from the first to the second point
    nodes: np.ndarray     # complex positions
    matrix: sparse.csr_matrix
    source: int
    target: int

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])


def _ring_levels(w, u_pts, h):
    """Radial-distance levels with step about ``h`` hitting every value in ``u_pts``."""
    levels = [u_pts[0]]
    for lo, hi in zip(u_pts[:-1], u_pts[1:]):
        k = max(1, int(math.ceil((hi - lo) / h - 1e-9)))
        levels.extend(np.linspace(lo, hi, k + 1)[1:])
    return np.asarray(levels)


def graph_size(w: RadialWeight, z, w2, resolution: int, rho_lo: float) -> int:
    """Node count :func:`build_polar_graph` would produce."""
    radii, counts = _layout(w, complex(z), complex(w2), resolution, rho_lo)
    return int(np.sum(counts))


def _layout(w, z, w2, resolution, rho_lo):
    h = 0.5 / resolution
    r1, r2 = abs(z), abs(w2)
    u1, u2 = float(w.radial_distance(0.0, r1)), float(w.radial_distance(0.0, r2))
    ulo = float(w.radial_distance(0.0, rho_lo))
    ua, ub = min(u1, u2), max(u1, u2)
    pts = sorted({ulo, ua, ub})
    levels = _ring_levels(w, pts, h)
    levels = np.append(levels, ub + h)
    radii = np.asarray(w.radius_at_distance(0.0, levels), dtype=float)
    # keep the end radii exact
    radii[np.argmin(np.abs(levels - u1))] = r1
    radii[np.argmin(np.abs(levels - u2))] = r2
    dth = _angle_gap(z, w2)
    g = radii / w.tau(radii)
    counts = np.where(radii > 0, np.ceil(dth * g / h).astype(int) + 1, 1)
    counts = np.maximum(counts, np.where(radii > 0, 2, 1)) if dth > 0 else np.ones_like(counts)
    return radii, counts


def build_polar_graph(w: RadialWeight, z, w2, resolution: int = DEFAULT_RESOLUTION,
                      rho_lo: float = 0.0) -> PolarGraph:
    """Polar sector graph spanning the rings from ``rho_lo`` out past both points."""
    z, w2 = complex(z), complex(w2)
    radii, counts = _layout(w, z, w2, resolution, rho_lo)
    dth = _angle_gap(z, w2)
    th1 = float(np.angle(z)) if z != 0 else float(np.angle(w2))
    th2 = float(np.angle(w2)) if w2 != 0 else th1
    diff = (th2 - th1 + math.pi) % (2 * math.pi) - math.pi
    sweep = math.copysign(dth, diff if diff != 0 else 1.0)

    offsets = np.concatenate([[0], np.cumsum(counts)])
    frac = [np.linspace(0.0, 1.0, c) if c > 1 else np.zeros(1) for c in counts]
    nodes = np.concatenate([r * np.exp(1j * (th1 + sweep * f)) for r, f in zip(radii, frac)])

    rows, cols = [], []
    for i, c in enumerate(counts):
        base = offsets[i]
        if c > 1:
            j = np.arange(c - 1)
            rows.append(base + j)
            cols.append(base + j + 1)
        for step, reach in ((1, 2), (2, 1)):
            k = i + step
            if k >= len(counts):
                continue
            ck = counts[k]
            centre = np.rint(frac[i] * (ck - 1)).astype(int) if ck > 1 else np.zeros(c, int)
            for d in range(-reach, reach + 1):
                tgt = centre + d
                ok = (tgt >= 0) & (tgt < ck)
                rows.append(base + np.arange(c)[ok])
                cols.append(offsets[k] + tgt[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    a, b = nodes[rows], nodes[cols]
    wts = np.abs(b - a) / w.tau(np.abs(0.5 * (a + b)))
    n = nodes.shape[0]
    mat = sparse.coo_matrix((wts, (rows, cols)), shape=(n, n)).tocsr()

    def index_of(p):
        i = int(np.argmin(np.abs(radii - abs(p))))
        j = 0 if p == z else counts[i] - 1
        return int(offsets[i] + j)

    return PolarGraph(radii=radii, counts=counts, offsets=offsets, theta0=th1, sweep=sweep,
                      nodes=nodes, matrix=mat, source=index_of(z), target=index_of(w2))


def shortest_path(g: PolarGraph) -> np.ndarray:
    dist, pred = csgraph.dijkstra(g.matrix, directed=False, indices=g.source,
                                  return_predecessors=True)
    if not np.isfinite(dist[g.target]):
        raise ResolutionTooCoarse("polar graph is disconnected")
    seq = [g.target]
    while seq[-1] != g.source:
        seq.append(pred[seq[-1]])
    return g.nodes[np.asarray(seq[::-1])]


# -- smoothing ------------------------------------------------------------------

def relax_polyline(w: RadialWeight, pts, passes: int = SMOOTHING_PASSES) -> np.ndarray:
    """Move interior vertices to shorten the path; end points stay fixed.

    Each pass updates even then odd vertices with a damped Newton step on the
    two adjacent segment costs, using finite differences on a stencil scaled to
    the local tau.  Steps that do not decrease the local cost are rejected.
    """
    p = np.array(pts, dtype=complex)
    if p.shape[0] < 3:
        return p
    for _ in range(passes):
        for parity in (1, 2):
            idx = np.arange(parity, p.shape[0] - 1, 2)
            if idx.size == 0:
                continue
            a, v, b = p[idx - 1], p[idx], p[idx + 1]
            cost = lambda q: _segments(w, a, q) + _segments(w, q, b)
            step = 1e-3 * np.minimum(np.abs(b - a), w.tau(np.abs(v)))
            f0 = cost(v)
            fxp, fxm = cost(v + step), cost(v - step)
            fyp, fym = cost(v + 1j * step), cost(v - 1j * step)
            fpp, fmm = cost(v + (1 + 1j) * step), cost(v - (1 + 1j) * step)
            # coincident neighbours give step 0; those vertices are left alone
            with np.errstate(divide="ignore", invalid="ignore"):
                gx, gy = (fxp - fxm) / (2 * step), (fyp - fym) / (2 * step)
                hxx = (fxp - 2 * f0 + fxm) / step ** 2
                hyy = (fyp - 2 * f0 + fym) / step ** 2
                hxy = (fpp - fxp - fyp + 2 * f0 - fxm - fym + fmm) / (2 * step ** 2)
                det = hxx * hyy - hxy ** 2
            good = (det > 0) & (hxx > 0) & (step > 0)
            safe = np.where(good, det, 1.0)
            dx = np.where(good, -(hyy * gx - hxy * gy) / safe, 0.0)
            dy = np.where(good, -(hxx * gy - hxy * gx) / safe, 0.0)
            move = dx + 1j * dy
            # keep moves local and inside the disk
            cap = 0.5 * np.minimum(np.abs(b - a), w.tau(np.abs(v)))
            big = np.abs(move) > cap
            move = np.where(big, move * cap / np.where(big, np.abs(move), 1.0), move)
            cand = v + move
            lim = np.abs(cand) < 1.0
            cand = np.where(lim, cand, v)
            better = cost(cand) < f0
            p[idx] = np.where(better, cand, v)
    return p


def _cost_grad(w, p, order=8):
    """Polyline cost and its gradient (as complex numbers) with respect to each vertex."""
    x, wx = _gl(order)
    a, b = p[:-1], p[1:]
    d = b - a
    ld = np.abs(d)
    z = a[:, None] + x * d[:, None]
    r = np.abs(z)
    t = w.tau(r)
    f = 1.0 / t
    # gradient of 1/tau(|z|) in the plane
    gf = -w.tau_prime(r) / t ** 2 * z / np.where(r > 0, r, 1.0)
    sf = np.sum(wx * f, axis=1)
    unit = d / np.where(ld > 0, ld, 1.0)
    ga = -unit * sf + ld * np.sum(wx * (1.0 - x) * gf, axis=1)
    gb = unit * sf + ld * np.sum(wx * x * gf, axis=1)
    grad = np.zeros_like(p)
    grad[:-1] += ga
    grad[1:] += gb
    return float(np.sum(ld * sf)), grad


def polish_polyline(w: RadialWeight, pts, maxiter: int = 400) -> np.ndarray:
    """Shorten the path globally with L-BFGS on the interior vertices."""
    p0 = np.array(pts, dtype=complex)
    if p0.shape[0] < 3:
        return p0
    k = p0.shape[0] - 2
    # vertices move in units of the local tau so all variables are comparable
    scale = w.tau(np.abs(p0[1:-1]))

    def fun(v):
        p = p0.copy()
        p[1:-1] += scale * (v[:k] + 1j * v[k:])
        if np.any(np.abs(p) >= 1.0):
            return 1e300, np.zeros_like(v)
        c, g = _cost_grad(w, p)
        g = g[1:-1] * scale
        return c, np.concatenate([g.real, g.imag])

    res = minimize(fun, np.zeros(2 * k), jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "ftol": 1e-11, "gtol": 1e-8})
    out = p0.copy()
    out[1:-1] += scale * (res.x[:k] + 1j * res.x[k:])
    return out


def _resample(w, pts, h):
    """Drop vertices so consecutive ones are about ``h`` apart in metric length."""
    if pts.shape[0] < 4:
        return pts
    seg = _segments(w, pts[:-1], pts[1:])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    keep = [0]
    for k in range(1, pts.shape[0] - 1):
        if cum[k] - cum[keep[-1]] >= h:
            keep.append(k)
    keep.append(pts.shape[0] - 1)
    return pts[np.asarray(keep)]


def _refine(pts, k):
    """Insert ``k - 1`` evenly spaced points inside every segment."""
    t = np.arange(k) / k
    inner = pts[:-1, None] + t[None, :] * (pts[1:] - pts[:-1])[:, None]
    return np.concatenate([inner.ravel(), pts[-1:]])


def geodesic_distance(w: RadialWeight, z, w2, resolution: int = DEFAULT_RESOLUTION,
                      r_max: float = DEFAULT_R_MAX, passes: int = SMOOTHING_PASSES,
                      max_nodes: int = MAX_GRAPH_NODES, check: bool = True) -> GeodesicEstimate:
    z, w2 = complex(z), complex(w2)
    for p in (z, w2):
        if not abs(p) <= r_max:
            raise BoundaryEscape(f"point {p} lies outside radius {r_max}")
    if z == w2:
        return GeodesicEstimate(0.0, 0.0, 0.0, np.array([z, w2]))
    lower = lower_bound(w, z, w2)
    seg = segment_distance(w, z, w2)
    best_val, best_path = seg, np.array([z, w2])

    dth = _angle_gap(z, w2)
    # skip the graph when the bracket is already tight, or when both ends of it
    # give rho = 1 to double precision
    tight = seg <= lower * (1.0 + TIGHT_REL)
    saturated = lower > SATURATED and seg <= BRACKET_LIMIT * lower
    if dth > 0 and not tight and not saturated:
        # the path's innermost radius rho satisfies climb(rho) <= seg
        r1, r2 = abs(z), abs(w2)
        rmin = min(r1, r2)
        slack = 0.5 * (seg - float(w.radial_distance(r1, r2)))
        u_lo = max(0.0, float(w.radial_distance(0.0, rmin)) - slack)
        rho_lo = float(w.radius_at_distance(0.0, u_lo))
        # very long paths (deep pairs) get a coarser spacing to bound the work
        h = max(0.5 / resolution, seg / MAX_PATH_VERTICES)
        if graph_size(w, z, w2, resolution, rho_lo) <= max_nodes:
            seed = shortest_path(build_polar_graph(w, z, w2, resolution, rho_lo))
        else:
            # too many nodes: start from the chord subdivided at metric spacing h
            seed = _refine(best_path, max(2, int(math.ceil(seg / h))))
        path = _resample(w, seed, h)
        if path.shape[0] < MIN_VERTICES:
            path = _refine(path, int(math.ceil(MIN_VERTICES / (path.shape[0] - 1))))
        path = relax_polyline(w, path, passes)
        for _ in range(REFINE_LEVELS):
            path = relax_polyline(w, _refine(path, 2), passes)
        for cand in (path, polish_polyline(w, path)):
            val = polyline_length(w, cand, order=24)
            if val < best_val:
                best_val, best_path = val, cand
    upper = max(best_val, lower)
    if check and lower > 0 and upper / lower > BRACKET_LIMIT:
        raise ResolutionTooCoarse(f"bracket [{lower:.6g}, {upper:.6g}] wider than {BRACKET_LIMIT}x")
    return GeodesicEstimate(lower=lower, estimate=upper, upper=upper, path=best_path)


# -- many pairs at once ---------------------------------------------------------

def distance_batch(w: RadialWeight, a, b, resolution: int = DEFAULT_RESOLUTION,
                    n_grid: int = 64, order: int = 16):
    """Distance brackets ``(lower, estimate, upper)`` for many pairs.

    Pairs whose straight segment is shorter than :data:`SHORT_DISTANCE` take
    the segment as the path; the lower bound is the one of
    :func:`lower_bound` restricted to the radii such a path can reach.
    Longer pairs go through :func:`geodesic_distance` one at a time.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    seg = _segments_split(w, a, b, order)
    lower = np.zeros_like(seg)
    upper = seg.copy()
    r1, r2 = np.abs(a), np.abs(b)
    rmin = np.minimum(r1, r2)
    short = (seg < SHORT_DISTANCE) & (a != b)
    if short.any():
        i = np.nonzero(short)[0]
        u_min = w.radial_distance(0.0, rmin[i])
        span = 0.5 * np.maximum(seg[i] - w.radial_distance(r1[i], r2[i]), 0.0)
        s = np.linspace(0.0, 1.0, n_grid)
        u = np.maximum(u_min[:, None] - span[:, None] * s[::-1], 0.0)
        rho = np.asarray(w.radius_at_distance(0.0, u))
        rho[:, -1] = rmin[i]
        A = w.radial_distance(rho, r1[i, None]) + w.radial_distance(rho, r2[i, None])
        d = np.abs(np.angle(a[i]) - np.angle(b[i]))
        dth = np.minimum(d, 2 * np.pi - d)
        dth = np.where((a[i] == 0) | (b[i] == 0), 0.0, dth)
        tt = w.tau(rho)
        B = dth[:, None] * rho / tt
        E = np.abs(a[i] - b[i])[:, None] / tt
        cell = np.maximum(np.hypot(A[:, 1:], B[:, :-1]), E[:, :-1])
        last = np.maximum(np.hypot(A[:, -1], B[:, -1]), E[:, -1])
        lb = np.minimum(cell.min(axis=1), last)
        # paths dipping below the first grid radius cost more than the segment
        lower[i] = np.minimum(lb, seg[i])
    for k in np.nonzero(~short & (a != b))[0]:
        g = geodesic_distance(w, a[k], b[k], resolution, check=False)
        lower[k], upper[k] = g.lower, g.upper
    return lower, upper.copy(), upper



def rho_tau(w: RadialWeight, z, w2, resolution: int = DEFAULT_RESOLUTION, **kw) -> RhoEstimate:
    g = geodesic_distance(w, z, w2, resolution, **kw)
    return RhoEstimate(_rho(g.lower), _rho(g.estimate), _rho(g.upper))


def rho_maps(w: RadialWeight, phi, psi, z, resolution: int = DEFAULT_RESOLUTION,
             r_max: float = DEFAULT_R_MAX, **kw) -> RhoEstimate:
    """``rho_tau(phi(z), psi(z))`` for map expressions ``phi``, ``psi``."""
    from .holomap import evaluate

    a = complex(evaluate(phi, complex(z)))
    b = complex(evaluate(psi, complex(z)))
    for name, p in (("phi", a), ("psi", b)):
        if not abs(p) <= r_max:
            raise BoundaryEscape(f"{name}({z}) = {p} lies outside radius {r_max}")
    return rho_tau(w, a, b, resolution, r_max=r_max, **kw)
