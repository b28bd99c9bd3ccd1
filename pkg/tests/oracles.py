"""Independent reference computations used only by the tests."""
import math

import mpmath
import numpy as np
from scipy import integrate, optimize


def clairaut_distance(tau, z, w):
    """Geodesic distance of |dz|/tau(|z|) from Clairaut's first integral.

    Along a geodesic ``r sin(beta) / tau(r) = c`` is constant; the angle swept
    and the length are one-dimensional integrals in ``r``.  Works for radially
    decreasing ``tau`` (``r / tau(r)`` increasing).
    """
    r1, r2 = abs(z), abs(w)
    if r1 > r2:
        r1, r2 = r2, r1
    dth = abs(np.angle(z) - np.angle(w))
    dth = min(dth, 2 * math.pi - dth)
    n = lambda r: 1.0 / tau(r)
    g = lambda r: r * n(r)            # increasing
    radial = integrate.quad(lambda r: n(r), r1, r2, epsabs=0, epsrel=1e-12, limit=200)[0]
    if dth < 1e-15 or r1 == 0.0:
        return radial

    # substitute r = rt + u^2 to remove the inverse-sqrt singularity at the turning point
    def pieces(c, a, b, turning):
        def fth(u):
            r = a + u * u
            return 2 * u * c / (r * math.sqrt(max(g(r) ** 2 - c * c, 1e-300)))

        def flen(u):
            r = a + u * u
            return 2 * u * n(r) * g(r) / math.sqrt(max(g(r) ** 2 - c * c, 1e-300))

        if b - a < 1e-12:
            return 0.0, (b - a) * n(b)
        ub = math.sqrt(b - a)
        th = integrate.quad(fth, 0, ub, epsabs=0, epsrel=1e-11, limit=400)[0]
        ln = integrate.quad(flen, 0, ub, epsabs=0, epsrel=1e-11, limit=400)[0]
        return th, ln

    def sweep_direct(c):  # no turning point, r monotone from r1 to r2; c < g(r1)
        return pieces(c, r1, r2, False)[0]

    c_top = g(r1)
    # angle at c -> g(r1) (tangential start at r1)
    th_top = pieces(c_top, r1, r2, True)[0] if r2 - r1 > 1e-12 else 0.0
    if dth <= th_top:
        c = optimize.brentq(lambda c: sweep_direct(c) - dth, 0.0, c_top * (1 - 1e-15), xtol=1e-15, rtol=1e-14)
        return pieces(c, r1, r2, False)[1]

    # turning point rt < r1 with g(rt) = c
    def total_angle(rt):
        c = g(rt)
        a1, _ = pieces(c, rt, r1, True)
        a2, _ = pieces(c, rt, r2, True)
        return a1 + a2

    if total_angle(1e-7) <= dth:
        return radial + 2 * integrate.quad(n, 0, r1, epsrel=1e-12)[0]  # through the origin
    rt = optimize.brentq(lambda rt: total_angle(rt) - dth, 1e-7, r1, xtol=1e-15, rtol=1e-14)
    c = g(rt)
    return pieces(c, rt, r1, True)[1] + pieces(c, rt, r2, True)[1]


def log_moment_mp(eta, n, peak_gap=None, dps=40):
    """High-precision log of 2 int_0^1 r^(2n+1) exp(-2 eta(r)) dr, integrated in the gap variable."""
    with mpmath.workdps(dps):
        f = lambda g: 2 * (1 - g) ** (2 * n + 1) * mpmath.exp(-2 * eta(1 - g)) if g > 0 else mpmath.mpf(0)
        gs = peak_gap if peak_gap is not None else 1 / mpmath.sqrt(n + 1)
        wd = gs ** 1.5 / 2
        pts = sorted(set([mpmath.mpf(0), mpmath.mpf(1)] +
                         [max(mpmath.mpf(10) ** -9, min(mpmath.mpf(1), gs + k * wd)) for k in range(-40, 41)]))
        return float(mpmath.log(mpmath.quad(f, pts)))
