import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bergman_kit import WeightSpec, make_weight
from bergman_kit import kernel as K
from bergman_kit.errors import InvalidRule, NonFiniteIntegrand, TruncationInsufficient
from bergman_kit.quadrature import (DiskRule, build_radial_rule, integrate_disk,
                                    integrate_radial, log_moment, log_moment_table)

from oracles import log_moment_mp


@pytest.fixture(scope="module")
def rule():
    return build_radial_rule()


@pytest.fixture(scope="module")
def t400(w1):
    return K.build_moments(w1, 400)


@pytest.mark.parametrize("f, exact", [(lambda z: np.ones_like(z.real), 1.0),
                                      (lambda z: np.abs(z) ** 2, 0.5),
                                      (lambda z: np.abs(z) ** 10, 1 / 6),
                                      (lambda z: z.real, 0.0)])
def test_disk_integrals(rule, f, exact):
    val, err = integrate_disk(f, DiskRule(rule))
    assert abs(val - exact) < 1e-12
    assert err < 1e-10


def test_radial_rule_shape(rule):
    assert np.all(np.diff(rule.nodes) > 0) and np.all(rule.weights > 0)
    assert integrate_radial(lambda r: 2 * r, rule) == pytest.approx(1.0, abs=1e-13)


def test_open_rule_covers_rmax_squared():
    r = build_radial_rule(r_max=0.9, closed=False)
    assert integrate_radial(lambda x: 2 * x, r) == pytest.approx(0.81, abs=1e-13)


@pytest.mark.parametrize("kw", [dict(r_max=1.0), dict(panels=0), dict(order=1)])
def test_invalid_rule(kw):
    with pytest.raises(InvalidRule):
        build_radial_rule(**kw)


def test_nonfinite_integrand_named(rule):
    with pytest.raises(NonFiniteIntegrand):
        integrate_disk(lambda z: 1 / (z - z[0, 0]), DiskRule(rule))


def test_weighted_disk_matches_radial(w1, rule):
    f = lambda z: np.abs(z) ** 2 * np.exp(-2 * w1.eta(np.abs(z)))
    val, _ = integrate_disk(f, DiskRule(rule))
    ref = integrate.quad(lambda r: 2 * r ** 3 * math.exp(-2 / (1 - r)), 0, 1, epsrel=1e-13)[0]
    assert val == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", [0, 1, 10, 100, 400, 3000])
def test_log_moment_vs_mpmath(w1, rule, n):
    ref = log_moment_mp(lambda r: 1 / (1 - r), n)
    assert log_moment(w1, n, rule) == pytest.approx(ref, abs=1e-12 * max(1, abs(ref)))


@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_moment_table_monotone_log_convex(alpha, rule):
    t = log_moment_table(make_weight(WeightSpec(alpha=alpha)), 400, rule)
    assert np.all(np.diff(t) < 0)
    assert np.all(t[:-2] + t[2:] - 2 * t[1:-1] >= -1e-12)


def test_kernel_basics(w1, t400):
    assert K.log_kernel_diag(t400, 0.0) == pytest.approx(-t400.log_mu[0])
    z = np.array([0.3, 0.5j, -0.7 + 0.1j])
    assert np.all(K.log_kernel_diag(t400, z) >= -t400.log_mu[0])
    assert np.allclose(np.abs(K.kernel_normalized(t400, z, z)), 1.0, atol=1e-12)
    k0 = K.kernel_normalized(t400, 0.6, 0.0)
    assert abs(k0 - math.exp(-0.5 * K.log_kernel_diag(t400, 0.6) - 0.5 * t400.log_mu[0])) < 1e-12
    a, b = K.kernel_normalized(t400, 0.5, -0.5), K.kernel_normalized(t400, -0.5, 0.5)
    assert abs(a.imag) < 1e-14 and abs(a - b) < 1e-14


def test_hermitian_symmetry(t400):
    z, w = 0.3 + 0.4j, -0.2 + 0.7j
    a, b = K.kernel_value(t400, z, w), K.kernel_value(t400, w, z)
    assert abs(a.value - np.conj(b.value)) <= 1e-12 * abs(a.value)


def test_e0_normalized(t400):
    assert math.exp(-t400.log_mu[0]) * math.exp(t400.log_mu[0]) == pytest.approx(1.0, abs=1e-10)


def test_diagonal_band_near_boundary(w1):
    t = K.cached_moments(w1)
    r = np.linspace(0.9, 0.995, 30)
    band = K.log_kernel_diag(t, r) - (2 * w1.eta(r) - 2 * np.log(w1.tau(r)))
    assert np.ptp(band) < 3.0


def test_truncation_reported(t400):
    with pytest.raises(TruncationInsufficient):
        K.log_kernel_diag(t400, 0.999)


def test_skwarczynski_values(t400):
    assert K.skwarczynski(t400, 0.4, 0.4) == 0.0
    s = K.skwarczynski(t400, 0.0, 0.75)
    lk = K.log_kernel_diag(t400, 0.75)
    assert s == pytest.approx(math.sqrt(1 - math.exp(-0.5 * lk - 0.5 * t400.log_mu[0])), rel=1e-10)
    assert K.skwarczynski(t400, 0.1, 0.7j) == pytest.approx(K.skwarczynski(t400, 0.7j, 0.1), abs=1e-14)


def test_kernel_diff_ratio_closed_reduction(t400):
    assert K.kernel_diff_ratio(t400, 0.3, 0.3) == 0.0
    kzz = math.exp(K.log_kernel_diag(t400, 0.75))
    k00 = math.exp(-t400.log_mu[0])
    ref = (kzz + k00 - 2 * k00) / (kzz + k00)
    assert K.kernel_diff_ratio(t400, 0.75, 0.0) == pytest.approx(ref, rel=1e-12)


def test_kernel_diff_no_cancellation(t400):
    z = 0.6 + 0.2j
    w = z + 1e-9
    v = K.kernel_diff_ratio(t400, z, w)
    assert 0 < v < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gram_psd(seed):
    t = K.cached_moments(make_weight(WeightSpec()))
    rng = np.random.default_rng(seed)
    z = 0.95 * np.sqrt(rng.random(8)) * np.exp(2j * np.pi * rng.random(8))
    G = K.kernel_normalized(t, z[:, None] * np.ones(8), np.ones(8)[:, None] * z[None, :])
    assert np.linalg.eigvalsh(G).min() >= -1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_skwarczynski_triangle(seed):
    t = K.build_moments(make_weight(WeightSpec()), 400)
    rng = np.random.default_rng(seed)
    z = 0.85 * np.sqrt(rng.random((3, 30))) * np.exp(2j * np.pi * rng.random((3, 30)))
    a, b, c = z
    ab, bc, ac = (K.skwarczynski(t, x, y) for x, y in ((a, b), (b, c), (a, c)))
    assert np.all(ac <= ab + bc + 1e-9)
    assert np.all(ab > 0)


@pytest.mark.parametrize("coeffs, z", [([1.0], 0.0), ([0, 0, 0, 1.0], 0.5), ([0] * 10 + [1.0], 0.9)])
def test_reproducing(t400, coeffs, z):
    assert K.reproduce_residual(t400, coeffs, z) < 1e-12


def test_truncation_stable_under_larger_table(w1, t400):
    t800 = K.build_moments(w1, 800)
    z, w = 0.8 + 0.1j, 0.75 - 0.2j
    assert abs(K.kernel_normalized(t400, z, w) - K.kernel_normalized(t800, z, w)) < 1e-12
