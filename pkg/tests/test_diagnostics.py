import math

import numpy as np
import pytest

from bergman_kit import diagnostics as dg
from bergman_kit.errors import BoundaryEscape
from bergman_kit.holomap import parse_map

PHI = parse_map("(1+z^2)/2")
PSI = parse_map("(1+z^2)/2 + 0.001953125*(1-z^2)^5")


def test_identity_bounded_not_compact(w1):
    m = parse_map("z")
    b = dg.boundedness_indicator(w1, m)
    assert b["bounded"] and abs(b["log_sup"]) < 1e-12
    v = dg.compactness_verdict(w1, m)
    assert not v["compact"]
    assert all(abs(p.extrapolated_limit - 1.0) < 1e-9 for p in v["profiles"])


def test_contraction_compact(w1):
    v = dg.compactness_verdict(w1, parse_map("z/2"))
    assert v["compact"]
    assert v["limsup"] < 1e-6


def test_log_ratio_closed_form(w1):
    # eta(phi(r)) - eta(r) = 1/(1+r) for this map and the alpha = 1 weight
    r = np.array([0.5, 0.9, 0.99, 0.999])
    assert np.allclose(dg.log_ratio(w1, PHI, r), 1.0 / (1.0 + r), rtol=1e-9)


@pytest.mark.parametrize("zeta", [1.0, -1.0])
def test_example_limit_at_contact(w1, zeta):
    p = dg.compactness_profile(w1, PHI, zeta)
    assert abs(p.extrapolated_limit / math.exp(0.5) - 1.0) < 2e-3


def test_example_other_rays_vanish(w1):
    v = dg.compactness_verdict(w1, PHI, rays=dg.default_rays(8))
    for p in v["profiles"]:
        if abs(abs(p.zeta.real) - 1.0) > 1e-12:
            assert p.extrapolated_limit < 1e-6
    assert not v["compact"]


def test_image_escape(w1):
    with pytest.raises(BoundaryEscape):
        dg.log_ratio(w1, parse_map("2*z"), 0.9)


def test_difference_functional_decreases(w1):
    vals = [dg.difference_functional(w1, PHI, PSI, r).value for r in (0.9, 0.99, 0.999)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] * 10 <= vals[0]


def test_difference_functional_control(w1):
    f = dg.difference_functional(w1, parse_map("z"), parse_map("0"), 0.999)
    assert f.lower <= f.value <= f.upper
    assert f.value > 0.99


def test_lower_bound_diff_norm(w1):
    far = dg.lower_bound_diff_norm(w1, parse_map("z"), parse_map("0"))
    assert far is not dg.NotApplicable and far >= 1.0
    near = dg.lower_bound_diff_norm(w1, parse_map("z/2"), parse_map("z/3"))
    assert near is dg.NotApplicable and not near


def test_carleson_identity_area(w1):
    # identity map, u = 1: the box measure is the normalized area delta^2 tau^2
    delta = w1.m_tau
    est = dg.carleson_box_ratio(w1, None, parse_map("z"), 2.0, 0.5, delta, n_samples=400_000)
    assert abs(est.ratio - delta ** 2) < 5 * est.std_error
    assert est.hits > 0


def test_carleson_chunk_independent(w1):
    kw = dict(n_samples=50_000, seed=11)
    a = dg.carleson_box_ratio(w1, 1.0, PHI, 1.0, 0.9, 0.1, chunk=50_000, **kw)
    b = dg.carleson_box_ratio(w1, 1.0, PHI, 1.0, 0.9, 0.1, chunk=7_000, **kw)
    assert a.ratio == pytest.approx(b.ratio, rel=1e-12)
    assert a.hits == b.hits


@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(delta=1.0), dict(p=0.0),
                                dict(xi=1.0), dict(xi=1.5j)])
def test_carleson_validation(w1, kw):
    args = dict(delta=0.1, p=2.0, xi=0.5)
    args.update(kw)
    with pytest.raises(ValueError):
        dg.carleson_box_ratio(w1, None, PHI, args["p"], args["xi"], args["delta"], n_samples=10)


def test_diagnose_report(w1):
    rep = dg.diagnose(w1, {"phi": PHI, "psi": PSI}, pair=("phi", "psi"),
                      rays=dg.default_rays(4))
    assert rep.verdicts["phi.bounded"] and not rep.verdicts["phi.compact"]
    assert rep.verdicts["difference.compact"]
    d = rep.to_dict()
    assert set(d) == {"boundedness", "compactness", "difference", "verdicts"}
