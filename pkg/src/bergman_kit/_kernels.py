"""Hot loops: windowed log-moment quadrature and the scaled kernel series.

Each kernel exists twice: a scalar-loop version compiled by numba and a
numpy version vectorized across points (or across moment indices).  Both run
the same algorithm, so results agree to round-off; ``USE_NUMBA`` picks one.
The numpy versions are also importable directly for benchmarking.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, maybe_njit

# Terms more than this many e-folds below the running maximum are dropped.
LOG_CUT = 60.0
Q_STOP = 1.0
TAIL_REL = 1e-14


# ---------------------------------------------------------------------------
# log moments  log(2 * sum_i w_i r_i^(2n+1) exp(-2 eta_i))
# ---------------------------------------------------------------------------

@maybe_njit
def _log_moments_loop(logr, m2eta, wts, n_max):
    npt = logr.shape[0]
    out = np.empty(n_max + 1)
    peak = 0
    for n in range(n_max + 1):
        k = 2.0 * n + 1.0
        while peak + 1 < npt and k * logr[peak + 1] + m2eta[peak + 1] >= k * logr[peak] + m2eta[peak]:
            peak += 1
        fmax = k * logr[peak] + m2eta[peak]
        lo = peak
        while lo > 0 and k * logr[lo - 1] + m2eta[lo - 1] > fmax - LOG_CUT:
            lo -= 1
        hi = peak
        while hi < npt - 1 and k * logr[hi + 1] + m2eta[hi + 1] > fmax - LOG_CUT:
            hi += 1
        s = 0.0
        for i in range(lo, hi + 1):
            s += wts[i] * math.exp(k * logr[i] + m2eta[i] - fmax)
        if s > 0.0:
            out[n] = fmax + math.log(2.0 * s)
        else:
            out[n] = -np.inf
    return out


def log_moments_numpy(logr, m2eta, wts, n_max, block=512):
    """Vectorized over blocks of moment indices with a node band around the peaks."""
    npt = logr.shape[0]
    # f_k(i+1) >= f_k(i)  <=>  k >= t_i ; t is non-decreasing for concave f.
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -(m2eta[1:] - m2eta[:-1]) / (logr[1:] - logr[:-1])
    t = np.maximum.accumulate(t)
    out = np.empty(n_max + 1)
    for start in range(0, n_max + 1, block):
        n = np.arange(start, min(start + block, n_max + 1))
        k = 2.0 * n + 1.0
        peak = np.searchsorted(t, k, side="right")
        half = 32
        while True:
            lo = max(int(peak.min()) - half, 0)
            hi = min(int(peak.max()) + half, npt - 1)
            f = k[:, None] * logr[None, lo:hi + 1] + m2eta[None, lo:hi + 1]
            fmax = f[np.arange(n.size), peak - lo]
            edge_ok = ((lo == 0 or np.all(f[:, 0] <= fmax - LOG_CUT))
                       and (hi == npt - 1 or np.all(f[:, -1] <= fmax - LOG_CUT)))
            if edge_ok:
                break
            half *= 2
        e = f - fmax[:, None]
        e[e <= -LOG_CUT] = -np.inf
        s = np.exp(e) @ wts[lo:hi + 1]
        with np.errstate(divide="ignore"):
            out[n] = fmax + np.log(2.0 * s)
    return out


def log_moments(logr, m2eta, wts, n_max):
    args = (np.ascontiguousarray(logr, dtype=np.float64),
            np.ascontiguousarray(m2eta, dtype=np.float64),
            np.ascontiguousarray(wts, dtype=np.float64), int(n_max))
    if USE_NUMBA:
        return _log_moments_loop(*args)
    return log_moments_numpy(*args)


# ---------------------------------------------------------------------------
# kernel series.  Every routine returns (log_sum, n_used, log_tail, ok) per
# point, where ok == False means the stopping rule was not met within the table.
# ---------------------------------------------------------------------------

@maybe_njit
def _stop(log_term, log_q, log_sum):
    # past the largest term (q < 1) and geometric tail below TAIL_REL * partial sum
    if log_q >= math.log(Q_STOP):
        return False, 0.0
    log_tail = log_term + log_q - math.log1p(-math.exp(log_q))
    return log_tail < math.log(TAIL_REL) + log_sum, log_tail


@maybe_njit
def _diag_loop(log_rho, log_mu):
    """log sum_n exp(2 n log_rho - log mu_n) for each log_rho (log|z w|/2 style)."""
    npt = log_rho.shape[0]
    nmax = log_mu.shape[0] - 1
    out = np.empty(npt)
    used = np.empty(npt, dtype=np.int64)
    tail = np.empty(npt)
    ok = np.empty(npt, dtype=np.bool_)
    for p in range(npt):
        lr = log_rho[p]
        if lr == -np.inf:
            out[p] = -log_mu[0]
            used[p] = 0
            tail[p] = -np.inf
            ok[p] = True
            continue
        m = -log_mu[0]
        s = 1.0
        done = False
        lt = -np.inf
        n = 0
        while n < nmax:
            log_term = 2.0 * n * lr - log_mu[n]
            log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
            if n > 0:
                if log_term > m:
                    s = s * math.exp(m - log_term) + 1.0
                    m = log_term
                else:
                    s += math.exp(log_term - m)
            stop, lt = _stop(log_term, log_q, m + math.log(s))
            if stop:
                done = True
                break
            n += 1
        out[p] = m + math.log(s)
        used[p] = n
        tail[p] = lt
        ok[p] = done
    return out, used, tail, ok


@maybe_njit
def _cross_loop(log_rz, log_rw, dtheta, log_mu):
    """Scaled sum_n (z conj(w))^n / mu_n returned as (log_scale, mantissa)."""
    npt = log_rz.shape[0]
    nmax = log_mu.shape[0] - 1
    scale = np.empty(npt)
    mant = np.empty(npt, dtype=np.complex128)
    ok = np.empty(npt, dtype=np.bool_)
    for p in range(npt):
        lr = 0.5 * (log_rz[p] + log_rw[p])
        if lr == -np.inf:
            scale[p] = -log_mu[0]
            mant[p] = 1.0
            ok[p] = True
            continue
        m = -log_mu[0]
        re = 1.0
        im = 0.0
        mag = 1.0
        done = False
        n = 0
        while n < nmax:
            log_term = 2.0 * n * lr - log_mu[n]
            log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
            if n > 0:
                c = math.cos(n * dtheta[p])
                s_ = math.sin(n * dtheta[p])
                if log_term > m:
                    f = math.exp(m - log_term)
                    re = re * f + c
                    im = im * f + s_
                    mag = mag * f + 1.0
                    m = log_term
                else:
                    f = math.exp(log_term - m)
                    re += f * c
                    im += f * s_
                    mag += f
            stop, lt = _stop(log_term, log_q, m + math.log(mag))
            if stop:
                done = True
                break
            n += 1
        # renormalize so that |mantissa| <= 1
        a = math.hypot(re, im)
        if a > 0.0:
            scale[p] = m + math.log(a)
            mant[p] = complex(re / a, im / a)
        else:
            scale[p] = m
            mant[p] = 0.0
        ok[p] = done
    return scale, mant, ok


@maybe_njit
def _diff_loop(z, w, log_mu):
    """log sum_n |z^n - w^n|^2 / mu_n via a cancellation-free recurrence."""
    npt = z.shape[0]
    nmax = log_mu.shape[0] - 1
    out = np.empty(npt)
    ok = np.empty(npt, dtype=np.bool_)
    for p in range(npt):
        zz = z[p]
        ww = w[p]
        R = max(abs(zz), abs(ww))
        if zz == ww or R == 0.0:
            out[p] = -np.inf
            ok[p] = True
            continue
        lr = math.log(R)
        zh = zz / R
        wh = ww / R
        d = zh - wh          # (z^n - w^n) / R^n for n = 1
        wpow = wh            # wh^n
        m = -np.inf
        s = 0.0
        done = False
        n = 1
        while n < nmax:
            a = abs(d)
            if a > 0.0:
                log_term = 2.0 * n * lr + 2.0 * math.log(a) - log_mu[n]
                if log_term > m:
                    s = s * math.exp(m - log_term) + 1.0 if m > -np.inf else 1.0
                    m = log_term
                else:
                    s += math.exp(log_term - m)
            # the envelope 4 R^(2n) / mu_n controls the tail
            env = math.log(4.0) + 2.0 * n * lr - log_mu[n]
            log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
            if m > -np.inf:
                stop, lt = _stop(env, log_q, m + math.log(s))
                if stop:
                    done = True
                    break
            d = zh * d + (zh - wh) * wpow
            wpow = wpow * wh
            n += 1
        out[p] = m + math.log(s) if s > 0.0 else -np.inf
        ok[p] = done
    return out, ok


# numpy fallbacks: the same recurrences, stepping n in Python and vectorizing over points

def diag_numpy(log_rho, log_mu):
    log_rho = np.asarray(log_rho, dtype=float)
    nmax = log_mu.shape[0] - 1
    npt = log_rho.shape[0]
    m = np.full(npt, -log_mu[0])
    s = np.ones(npt)
    used = np.zeros(npt, dtype=np.int64)
    tail = np.full(npt, -np.inf)
    ok = np.zeros(npt, dtype=bool)
    active = np.isfinite(log_rho)
    ok[~active] = True
    lq_stop = math.log(Q_STOP)
    for n in range(nmax):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        lr = log_rho[idx]
        log_term = 2.0 * n * lr - log_mu[n]
        log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
        if n > 0:
            mi, si = m[idx], s[idx]
            up = log_term > mi
            si = np.where(up, si * np.exp(np.minimum(mi - log_term, 0.0)) + 1.0,
                          si + np.exp(np.minimum(log_term - mi, 0.0)))
            m[idx] = np.maximum(mi, log_term)
            s[idx] = si
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = log_term + log_q - np.log1p(-np.exp(np.minimum(log_q, 0.0)))
        stop = (log_q < lq_stop) & (lt < math.log(TAIL_REL) + m[idx] + np.log(s[idx]))
        tail[idx] = lt
        used[idx] = n
        ok[idx[stop]] = True
        active[idx[stop]] = False
    used[active] = nmax
    return m + np.log(s), used, tail, ok


def cross_numpy(log_rz, log_rw, dtheta, log_mu):
    lr_all = 0.5 * (np.asarray(log_rz, float) + np.asarray(log_rw, float))
    nmax = log_mu.shape[0] - 1
    npt = lr_all.shape[0]
    m = np.full(npt, -log_mu[0])
    acc = np.ones(npt, dtype=complex)
    mag = np.ones(npt)
    ok = np.zeros(npt, dtype=bool)
    active = np.isfinite(lr_all)
    ok[~active] = True
    lq_stop = math.log(Q_STOP)
    for n in range(nmax):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        lr = lr_all[idx]
        log_term = 2.0 * n * lr - log_mu[n]
        log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
        if n > 0:
            mi = m[idx]
            ph = np.exp(1j * n * dtheta[idx])
            up = log_term > mi
            f_old = np.where(up, np.exp(np.minimum(mi - log_term, 0.0)), 1.0)
            f_new = np.where(up, 1.0, np.exp(np.minimum(log_term - mi, 0.0)))
            acc[idx] = acc[idx] * f_old + f_new * ph
            mag[idx] = mag[idx] * f_old + f_new
            m[idx] = np.maximum(mi, log_term)
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = log_term + log_q - np.log1p(-np.exp(np.minimum(log_q, 0.0)))
        stop = (log_q < lq_stop) & (lt < math.log(TAIL_REL) + m[idx] + np.log(mag[idx]))
        ok[idx[stop]] = True
        active[idx[stop]] = False
    a = np.abs(acc)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(a > 0, m + np.log(a), m)
        mant = np.where(a > 0, acc / np.where(a > 0, a, 1.0), 0.0)
    return scale, mant, ok


def diff_numpy(z, w, log_mu):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    nmax = log_mu.shape[0] - 1
    R = np.maximum(np.abs(z), np.abs(w))
    out = np.full(z.shape[0], -np.inf)
    ok = np.zeros(z.shape[0], dtype=bool)
    active = (z != w) & (R > 0)
    ok[~active] = True
    idx0 = np.nonzero(active)[0]
    if idx0.size == 0:
        return out, ok
    Rs = R[idx0]
    lr = np.log(Rs)
    zh = z[idx0] / Rs
    wh = w[idx0] / Rs
    d = zh - wh
    wpow = wh.copy()
    m = np.full(idx0.size, -np.inf)
    s = np.zeros(idx0.size)
    live = np.ones(idx0.size, dtype=bool)
    done = np.zeros(idx0.size, dtype=bool)
    lq_stop = math.log(Q_STOP)
    for n in range(1, nmax):
        if not live.any():
            break
        a = np.abs(d)
        with np.errstate(divide="ignore"):
            log_term = 2.0 * n * lr + 2.0 * np.log(a) - log_mu[n]
        upd = live & (a > 0)
        up = upd & (log_term > m)
        keep = upd & ~up
        with np.errstate(invalid="ignore", over="ignore"):
            s = np.where(up, np.where(np.isfinite(m), s * np.exp(np.minimum(m - log_term, 0.0)), 0.0) + 1.0, s)
            s = np.where(keep, s + np.exp(np.minimum(log_term - m, 0.0)), s)
        m = np.where(up, log_term, m)
        env = math.log(4.0) + 2.0 * n * lr - log_mu[n]
        log_q = 2.0 * lr + log_mu[n] - log_mu[n + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            lt = env + log_q - np.log1p(-np.exp(np.minimum(log_q, 0.0)))
            stop = live & np.isfinite(m) & (log_q < lq_stop) & (lt < math.log(TAIL_REL) + m + np.log(s))
        done |= stop
        live &= ~stop
        d = zh * d + (zh - wh) * wpow
        wpow = wpow * wh
    with np.errstate(divide="ignore"):
        out[idx0] = np.where(s > 0, m + np.log(np.where(s > 0, s, 1.0)), -np.inf)
    ok[idx0] = done
    return out, ok


def kernel_diag(log_rho, log_mu):
    log_rho = np.ascontiguousarray(log_rho, dtype=np.float64)
    if USE_NUMBA:
        return _diag_loop(log_rho, log_mu)
    return diag_numpy(log_rho, log_mu)


def kernel_cross(log_rz, log_rw, dtheta, log_mu):
    a = [np.ascontiguousarray(x, dtype=np.float64) for x in (log_rz, log_rw, dtheta)]
    if USE_NUMBA:
        return _cross_loop(a[0], a[1], a[2], log_mu)
    return cross_numpy(a[0], a[1], a[2], log_mu)


def kernel_diff(z, w, log_mu):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.complex128)
    if USE_NUMBA:
        return _diff_loop(z, w, log_mu)
    return diff_numpy(z, w, log_mu)
