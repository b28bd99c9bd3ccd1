"""Acceptance criteria 1 to 12, one test and one summary line each."""
import cmath
import json
import math
import time

import numpy as np
import pytest

from bergman_kit import WeightSpec, cli, make_weight
from bergman_kit import diagnostics as dg
from bergman_kit import hilbert_schmidt as H
from bergman_kit import inequality_lab as L
from bergman_kit import kernel as K
from bergman_kit import metric as M
from bergman_kit.holomap import (Add, Const, IntPow, Mul, Neg, Sub, Var, eval_jet, evaluate,
                                 fold, parse_map, to_string)

PHI = cli.EXAMPLE_PHI
PSI = f"{cli.EXAMPLE_PHI} + {cli.EXAMPLE_EPSILON!r}*(1-z^2)^5"


@pytest.fixture(scope="module")
def pair_probes(w1):
    spec = L.SampleSpec(count=500, r_max=0.995)
    return {pid: L.run_probe(w1, pid, spec, seed=0)
            for pid in (L.ProbeId.RHO_VS_S, L.ProbeId.KERNEL_DIFF_EQUIV)}


def test_c01_reproducing_property(w1, criterion):
    t0 = time.perf_counter()
    t = K.build_moments(w1, 400, tol=1e-12)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        deg = int(rng.integers(0, 11))
        c = rng.standard_normal(deg + 1) + 1j * rng.standard_normal(deg + 1)
        z = 0.9 * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        pz = abs(np.polynomial.polynomial.polyval(z, c))
        # library residual is scaled by |p(z)| + 1; rescale to |p(z)|
        worst = max(worst, K.reproduce_residual(t, c, z) * (pz + 1.0) / pz)
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and dt < 30
    criterion(1, ok, f"max relative residual {worst:.2e} (< 1e-8), {dt:.1f} s (< 30 s)")
    assert ok


def test_c02_moment_integrity(criterion):
    worst = {}
    for alpha in (1.0, 2.0, 3.0):
        t = K.build_moments(make_weight(WeightSpec(alpha=alpha)), 400, check=False)
        d = t.ratio
        worst[alpha] = max(float(d.max()), float(-(np.diff(d)).min()))
        K.check_table(t, 1e-12)
    ok = all(v < 1e-12 for v in worst.values())
    criterion(2, ok, "max of step and negated curvature of log mu, per alpha: "
              + ", ".join(f"{a:g}: {v:.2e}" for a, v in worst.items()) + " (< 1e-12)")
    assert ok


def test_c03_gram_psd(w1, criterion):
    t = K.cached_moments(w1)
    rng = np.random.default_rng(3)
    low = math.inf
    for _ in range(20):
        z = 0.95 * np.sqrt(rng.random(8)) * np.exp(2j * np.pi * rng.random(8))
        G = K.kernel_normalized(t, z[:, None] * np.ones(8), np.ones(8)[:, None] * z[None, :])
        low = min(low, float(np.linalg.eigvalsh(G).min()))
    ok = low >= -1e-10
    criterion(3, ok, f"min eigenvalue {low:.2e} (>= -1e-10)")
    assert ok


def test_c04_geodesic_closed_form(w1, criterion):
    g = M.geodesic_distance(w1, 0.0, 0.75)
    r = M.rho_tau(w1, 0.0, 0.75)
    exact_rho = 1.0 - math.exp(-2.0)
    ok = g.lower <= 2.0 <= g.upper and g.width < 1e-3 and abs(r.value - exact_rho) < 1e-3
    criterion(4, ok, f"d in [{g.lower:.9f}, {g.upper:.9f}] width {g.width:.1e}; "
                     f"rho {r.value:.6f} vs {exact_rho:.6f}")
    assert ok


def test_c05_rho_over_s(pair_probes, criterion):
    rep = pair_probes[L.ProbeId.RHO_VS_S]
    c, drift = rep.constants["C3"], rep.refinement_drift["C3"]
    ok = math.isfinite(c) and math.isfinite(rep.refined_constants["C3"]) and drift < 0.2
    criterion(5, ok, f"C3 = {c:.4f}, refined {rep.refined_constants['C3']:.4f}, drift {drift:.3f} "
                     f"(< 0.2), {rep.valid_samples} pairs up to |z| = {rep.sample_spec['r_max_used']}")
    assert ok


def test_c06_kernel_difference_band(pair_probes, criterion):
    rep = pair_probes[L.ProbeId.KERNEL_DIFF_EQUIV]
    lo, hi = rep.constants["band_min"], rep.constants["band_max"]
    d = rep.refinement_drift
    ok = lo > 0 and math.isfinite(hi) and d["band_min"] < 0.2 and d["band_max"] < 0.2
    criterion(6, ok, f"band [{lo:.4f}, {hi:.4f}], drift min {d['band_min']:.3f} "
                     f"max {d['band_max']:.3f} (< 0.2)")
    assert ok


def test_c07_dual_computation(w1, criterion):
    details, ok = [], True
    for name, a, b in (("constants", "0.5", "0"), ("example pair", PHI, PSI)):
        phi, psi = parse_map(a), parse_map(b)
        x = H.hs_difference(w1, phi, psi)
        y = H.hs_difference_basis(w1, phi, psi)
        rel = abs(x.value / y.value - 1.0)
        tail = y.extra["degree_tail"] / y.value
        ok &= rel < 5e-3 and tail < 1e-3
        details.append(f"{name}: rel diff {rel:.1e}, basis tail {tail:.1e}")
    criterion(7, ok, "; ".join(details) + " (< 5e-3, tail < 1e-3)")
    assert ok


def test_c08_example_reproduction(tmp_path, criterion):
    out = tmp_path / "example5.json"
    t0 = time.perf_counter()
    code = cli.main(["example5", "--out", str(out)])
    dt = time.perf_counter() - t0
    report = json.loads(out.read_text())["result"]
    at_pm1 = [v for m in ("phi", "psi")
              for a, v in report["evidence"][m]["limits_by_angle_deg"].items()
              if float(a) in (0.0, 180.0)]
    vals = [v["value"] for v in report["evidence"]["difference"]["values"]]
    failed = [k for k, v in report["checks"].items() if not v]
    ok = code == 0 and report["verdict"] == "PASS" and dt < 120
    criterion(8, ok, f"exit {code}; limits at +-1 {min(at_pm1):.5f}..{max(at_pm1):.5f} "
                     f"(e^0.5 = {math.exp(0.5):.5f}); difference at r = 0.9/0.99/0.999 "
                     + "/".join(f"{v:.3e}" for v in vals)
                     + f"; failed checks {failed}; {dt:.1f} s (< 120 s)")
    assert ok


def test_c09_negative_control(w1, criterion):
    phi, psi = parse_map("z"), parse_map("0")
    prof = dg.difference_profile(w1, phi, psi, rays=dg.default_rays(4))
    lim = min(p.extrapolated_limit for p in prof.profiles)
    rep = H.hs_difference(w1, phi, psi)
    metric = H.hs_metric(w1, phi, psi)
    ok = lim > 0.5 and rep.infinite and metric == 1.0
    criterion(9, ok, f"boundary limit {lim:.4f}, hs_difference infinite={rep.infinite}, "
                     f"hs_metric {metric}")
    assert ok


def _random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return Var()
        return Const(complex(round(rng.uniform(-5, 5), 3), float(rng.choice([0.0, 0.5, -2.0]))))
    k = int(rng.integers(0, 5))
    a = _random_tree(rng, depth - 1)
    if k == 0:
        return Neg(a)
    if k == 4:
        return IntPow(a, int(rng.integers(0, 5)))
    b = _random_tree(rng, depth - 1)
    return (Add, Sub, Mul)[k - 1](a, b)


def test_c10_parser_and_jets(criterion):
    rng = np.random.default_rng(10)
    stable = 0
    for _ in range(100):
        s = to_string(fold(_random_tree(rng, 5)))
        again = parse_map(s)
        stable += to_string(again) == s and to_string(parse_map(to_string(again))) == s
    m = parse_map(f"{PSI} + z^3/(3-z)")
    worst, h = 0.0, 1e-5
    for _ in range(100):
        z0 = 0.95 * math.sqrt(rng.random()) * cmath.exp(2j * math.pi * rng.random())
        fd = (evaluate(m, z0 + h) - evaluate(m, z0 - h)) / (2 * h)
        d1 = eval_jet(m, z0, 1).derivative(1)
        worst = max(worst, abs(d1 - fd) / abs(d1))
    ok = stable == 100 and worst < 1e-6
    criterion(10, ok, f"{stable}/100 round trips byte-stable; max jet vs central difference "
                      f"rel error {worst:.1e} (< 1e-6)")
    assert ok


def _suite(tmp_path, name, *flags):
    out = tmp_path / f"{name}.json"
    code = cli.main(["probe", "--id", "all", "--out", str(out), *flags])
    rep = json.loads(out.read_text())["result"]
    failed = [p["id"] for p in rep["probes"] if p["status"] != "PASS"]
    return code, rep["summary"], failed


def test_c11_probe_suite(tmp_path, criterion):
    a1 = _suite(tmp_path, "alpha1", "--alpha", "1")
    a2 = _suite(tmp_path, "alpha2", "--alpha", "2")
    ctl = _suite(tmp_path, "control", "--tau-exponent", "0.9")
    ok = a1[:2] == (0, "PASS") and a2[:2] == (0, "PASS") and ctl[:2] == (2, "FAIL")
    criterion(11, ok, f"alpha=1 {a1[1]} {a1[2]}; alpha=2 {a2[1]} {a2[2]}; "
                      f"broken tau {ctl[1]} (failing {', '.join(ctl[2])})")
    assert ok


def test_c12_path_continuity(w1, criterion):
    phi, psi = parse_map(PHI), parse_map(PSI)
    coarse = H.path_scan(w1, phi, psi, np.linspace(0, 1, 9))
    fine = H.path_scan(w1, phi, psi, np.linspace(0, 1, 17))
    q = fine["max_sqrt_value"] / coarse["max_sqrt_value"]
    ok = coarse["all_finite"] and fine["all_finite"] and abs(q - 0.5) <= 0.25 * 0.5
    criterion(12, ok, f"max adjacent HS norm {coarse['max_sqrt_value']:.4e} -> "
                      f"{fine['max_sqrt_value']:.4e}, ratio {q:.4f} (0.5 +- 25%)")
    assert ok
