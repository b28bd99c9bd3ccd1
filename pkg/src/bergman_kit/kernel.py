"""Reproducing kernel of A^2(omega) for a radial weight.

Monomials are orthogonal, so ``K(z, w) = sum_n (z conj(w))^n / mu_n`` with
``mu_n = ||z^n||^2``.  All series are summed in log-scaled arithmetic with the
stopping rule of ``_kernels``; a point whose series is not settled inside the
table raises :class:`TruncationInsufficient`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import TableInvariantViolation, TruncationInsufficient
from .quadrature import RadialRule, build_radial_rule, log_moment_table
from .weights import RadialWeight

DEFAULT_N_MAX = 400
LARGE_N_MAX = 100_000


@dataclass(frozen=True)
class ScaledKernelValue:
    log_scale: float
    mantissa: complex

    @property
    def value(self) -> complex:
        return self.mantissa * math.exp(self.log_scale)


@dataclass(frozen=True, eq=False)
class MomentTable:
    weight: RadialWeight
    log_mu: np.ndarray
    error: np.ndarray
    ratio: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ratio", np.diff(self.log_mu))

    @property
    def n_max(self) -> int:
        return self.log_mu.shape[0] - 1

    def required_terms(self, rho: float) -> int:
        """Rough number of terms the diagonal series at radius ``rho`` needs."""
        if rho <= 0:
            return 1
        # the ratio -d/dn log mu_n decays like a power of n; extrapolate it from
        # the last decade of the table and find where q reaches Q_STOP.
        target = math.log(_kernels.Q_STOP) - 2.0 * math.log(rho)
        n = np.arange(max(1, self.n_max // 10), self.n_max)
        dr = -self.ratio[n]
        slope, icpt = np.polyfit(np.log(n), np.log(dr), 1)
        if slope >= 0 or target <= 0:
            return 10 * self.n_max
        n_q = math.exp((math.log(target) - icpt) / slope)
        return int(1.5 * n_q) + 1

    def working_radius(self) -> float:
        """Largest radius (to 1e-6) at which the diagonal series closes in the table."""
        lo, hi = 0.0, 1.0 - 1e-12
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            _, _, _, ok = _kernels.kernel_diag(np.array([math.log(mid)]), self.log_mu)
            if ok[0]:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-7:
                break
        return lo


def build_moments(w: RadialWeight, n_max: int = DEFAULT_N_MAX,
                  rule: RadialRule | None = None, check: bool = True,
                  tol: float = 1e-12) -> MomentTable:
    if n_max < 16:
        raise ValueError(f"n_max must be >= 16, got {n_max}")
    rule = rule or build_radial_rule()
    log_mu = log_moment_table(w, n_max, rule)
    coarse = build_radial_rule(rule.panels, max(2, rule.order - 4), rule.r_max, rule.closed)
    err = np.abs(log_moment_table(w, n_max, coarse) - log_mu)
    table = MomentTable(weight=w, log_mu=log_mu, error=err)
    if check:
        check_table(table, tol)
    return table


@lru_cache(maxsize=8)
def cached_moments(w: RadialWeight, n_max: int = LARGE_N_MAX) -> MomentTable:
    """Table built with the default rule, memoized per weight and size."""
    return build_moments(w, n_max)


@lru_cache(maxsize=8)
def cached_working_radius(w: RadialWeight, n_max: int = LARGE_N_MAX) -> float:
    return cached_moments(w, n_max).working_radius()


def check_table(t: MomentTable, tol: float = 1e-12) -> None:
    d = t.ratio
    if not np.all(d < tol):
        n = int(np.argmax(d >= tol))
        raise TableInvariantViolation(f"log mu not decreasing at n={n}")
    second = d[1:] - d[:-1]
    if not np.all(second >= -tol):
        n = int(np.argmax(second < -tol)) + 1
        raise TableInvariantViolation(f"log-convexity broken at n={n} (by {-second[n-1]:.3g})")


def _as_array(z):
    return np.atleast_1d(np.asarray(z, dtype=complex))


def _raise_if_truncated(t: MomentTable, ok, rho):
    if not np.all(ok):
        r = float(np.max(np.asarray(rho)[~np.asarray(ok)]))
        raise TruncationInsufficient(t.required_terms(r), t.n_max)


def log_kernel_diag(t: MomentTable, z):
    """``log K(z, z)``; scalar in, scalar out."""
    za = _as_array(z).ravel()
    rho = np.abs(za)
    with np.errstate(divide="ignore"):
        lr = np.log(rho)
    val, _, _, ok = _kernels.kernel_diag(lr, t.log_mu)
    _raise_if_truncated(t, ok, rho)
    return float(val[0]) if np.ndim(z) == 0 else val.reshape(np.shape(z))


def log_kernel_diag_with_tail(t: MomentTable, z):
    za = _as_array(z)
    rho = np.abs(za)
    with np.errstate(divide="ignore"):
        lr = np.log(rho)
    val, used, tail, ok = _kernels.kernel_diag(lr, t.log_mu)
    _raise_if_truncated(t, ok, rho)
    return val, used, tail


def kernel_norm(t: MomentTable, z):
    return np.exp(0.5 * log_kernel_diag(t, z))


def log_kernel_cross(t: MomentTable, z, w):
    """Scaled ``K(z, w)`` (arrays): returns (log_scale, mantissa)."""
    za, wa = np.broadcast_arrays(_as_array(z), _as_array(w))
    shape = za.shape
    za, wa = za.ravel(), wa.ravel()
    rz, rw = np.abs(za), np.abs(wa)
    with np.errstate(divide="ignore"):
        lz, lw = np.log(rz), np.log(rw)
    dth = np.angle(za) - np.angle(wa)
    scale, mant, ok = _kernels.kernel_cross(lz, lw, dth, t.log_mu)
    _raise_if_truncated(t, ok, np.sqrt(rz * rw))
    return scale.reshape(shape), mant.reshape(shape)


def kernel_value(t: MomentTable, z, w) -> ScaledKernelValue:
    scale, mant = log_kernel_cross(t, z, w)
    return ScaledKernelValue(float(scale[0]), complex(mant[0]))


def kernel_normalized(t: MomentTable, z, w):
    """``K(z, w) / (||K_z|| ||K_w||)``; modulus at most one."""
    scalar = np.ndim(z) == 0 and np.ndim(w) == 0
    za, wa = np.broadcast_arrays(_as_array(z), _as_array(w))
    scale, mant = log_kernel_cross(t, za, wa)
    lkz = log_kernel_diag(t, za)
    lkw = log_kernel_diag(t, wa)
    out = mant * np.exp(scale - 0.5 * lkz - 0.5 * lkw)
    return complex(out[0]) if scalar else out


def skwarczynski(t: MomentTable, z, w):
    """``sqrt(1 - |K(z,w)| / (||K_z|| ||K_w||))``."""
    k = np.abs(kernel_normalized(t, z, w))
    s = np.sqrt(np.clip(1.0 - k, 0.0, 1.0))
    za, wa = np.broadcast_arrays(_as_array(z), _as_array(w))
    s = np.where(za == wa, 0.0, s) if np.ndim(s) else (0.0 if z == w else float(s))
    return s


def log_kernel_diff(t: MomentTable, z, w):
    """``log ||K_z - K_w||^2`` from the non-negative series ``sum |z^n - w^n|^2 / mu_n``."""
    za, wa = np.broadcast_arrays(_as_array(z), _as_array(w))
    shape = za.shape
    za, wa = za.ravel(), wa.ravel()
    val, ok = _kernels.kernel_diff(za, wa, t.log_mu)
    _raise_if_truncated(t, ok, np.maximum(np.abs(za), np.abs(wa)))
    return val.reshape(shape)


def kernel_diff_ratio(t: MomentTable, z, w):
    """``||K_z - K_w||^2 / (||K_z||^2 + ||K_w||^2)``, a value in ``[0, 2]``."""
    scalar = np.ndim(z) == 0 and np.ndim(w) == 0
    za, wa = np.broadcast_arrays(_as_array(z), _as_array(w))
    num = log_kernel_diff(t, za, wa)
    den = np.logaddexp(log_kernel_diag(t, za), log_kernel_diag(t, wa))
    out = np.exp(num - den)
    return float(out[0]) if scalar else out


def reproduce_residual(t: MomentTable, coeffs, z, rule=None) -> float:
    """Residual ``|<p, K_z> - p(z)| / (|p(z)| + 1)`` with the inner product done by quadrature.

    ``<p, K_z> = int p(xi) K(z, xi) omega(xi)^2 dA(xi)``; the angular integral
    is exact on a uniform grid with more points than twice the degree, so the
    disk integral reduces to radial integrals of the monomial pairs.
    """
    from .quadrature import DiskRule

    coeffs = np.asarray(coeffs, dtype=complex)
    deg = coeffs.shape[0] - 1
    if 2 * deg > t.n_max:
        raise ValueError("polynomial degree must be <= n_max / 2")
    rule = rule or DiskRule(build_radial_rule(), n_theta=max(8, 2 * (deg + 1) + 2 - (2 * (deg + 1)) % 2))
    xi, wa = rule.points()
    # K(z, xi) = sum_n z^n conj(xi)^n / mu_n; only n <= deg survives against p.
    n = np.arange(deg + 1)
    gaps = rule.radial.gaps[:, None] * np.ones((1, rule.n_theta))
    log_w2 = -2.0 * t.weight.eta_from_gap(gaps)
    p_xi = np.polynomial.polynomial.polyval(xi, coeffs)
    kz = np.zeros_like(xi)
    zpow = np.asarray(z, dtype=complex) ** n
    for k in range(deg + 1):
        kz += zpow[k] * np.conj(xi) ** k * np.exp(-t.log_mu[k] + log_w2)
    # conj(K(xi, z)) = K(z, xi): <p, K_z> = int p * conj(K_z) w^2 = int p K(z, xi) w^2
    inner = np.sum(wa * p_xi * kz)
    pz = np.polynomial.polynomial.polyval(z, coeffs)
    return float(abs(inner - pz) / (abs(pz) + 1.0))
