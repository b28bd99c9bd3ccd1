import json
import math

import numpy as np
import pytest

from bergman_kit import WeightSpec, make_weight
from bergman_kit import inequality_lab as L
from bergman_kit import kernel as K
from bergman_kit.errors import InsufficientSamples

SMALL = L.SampleSpec(count=60)


@pytest.fixture(scope="module")
def broken():
    return make_weight(WeightSpec(tau_exponent=0.9))


def test_sobol_prefix_stable():
    a = L._sobol(3, 64, 5)
    b = L._sobol(3, 128, 5)
    assert np.array_equal(a, b[:64])


def test_poly_bank_prefix_stable():
    a = L._poly_bank(100, 7)
    b = L._poly_bank(300, 7)
    for x, y in zip(a, b):
        assert np.array_equal(x, y[:100])


def test_candidate_ratio_cauchy_schwarz(w1):
    t = K.cached_moments(w1)
    rng = np.random.default_rng(0)
    z = 0.9 * np.sqrt(rng.random(40)) * np.exp(2j * np.pi * rng.random(40))
    v = 0.9 * np.sqrt(rng.random(40)) * np.exp(2j * np.pi * rng.random(40))
    r = np.asarray(L.candidate_ratio(t, z, v))
    assert np.all((r >= 0) & (r <= 1 + 1e-12))
    assert np.allclose(L.candidate_ratio(t, z, z), 0.0, atol=1e-12)


@pytest.mark.parametrize("pid", [L.ProbeId.EQUIQUAN, L.ProbeId.KERNEL_UPPER, L.ProbeId.RHO_VS_S])
def test_probe_deterministic(w1, pid):
    a = L.run_probe(w1, pid, SMALL, seed=7).to_dict()
    b = L.run_probe(w1, pid, SMALL, seed=7).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


@pytest.mark.parametrize("pid", [L.ProbeId.KERNEL_UPPER, L.ProbeId.SUBMEAN_1, L.ProbeId.LOWERDS,
                                 L.ProbeId.KERNEL_DIFF_EQUIV])
def test_witness_reevaluates(w1, pid):
    # polynomial probes split the sample between p = 1 and p = 2
    rep = L.run_probe(w1, pid, L.SampleSpec(count=120), seed=3)
    assert rep.witnesses
    for name, wit in rep.witnesses.items():
        again = L.reevaluate_witness(w1, pid, name, wit)
        assert abs(again / wit["value"] - 1) < 1e-2


def test_insufficient_samples(w1):
    with pytest.raises(InsufficientSamples):
        L.run_probe(w1, L.ProbeId.EQUIQUAN, L.SampleSpec(count=20))


def test_equiquan_bounds_reported(w1):
    rep = L.run_probe(w1, L.ProbeId.EQUIQUAN, SMALL)
    assert rep.passed
    assert rep.bounds["ratio_max"]["satisfied"] and rep.bounds["ratio_min"]["satisfied"]
    assert rep.constants["ratio_min"] <= 1.0 <= rep.constants["ratio_max"]


def test_rho_vs_s_finite(w1):
    rep = L.run_probe(w1, L.ProbeId.RHO_VS_S, SMALL)
    assert rep.passed
    assert 0 < rep.constants["C3"] < math.inf


def test_lowerds_sqrt2(w1):
    rep = L.run_probe(w1, L.ProbeId.LOWERDS, SMALL)
    assert rep.passed
    assert rep.constants["candidate_over_S"] <= math.sqrt(2) + 1e-9


def test_broken_tau_fails_lipschitz(broken):
    rep = L.run_probe(broken, L.ProbeId.LIPSCHITZ_TAU, SMALL)
    assert not rep.passed
    assert rep.refinement_drift["lipschitz"] > L.DRIFT_LIMIT


def test_report_json_round_trip(w1):
    rep = L.run_probe(w1, L.ProbeId.KERNEL_UPPER, SMALL)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["status"] == "PASS"
    assert d["id"] == "KERNEL_UPPER"


def test_candidate_below_extremal_value(w1):
    # the extremal problem sup{|f(z)| : f(v) = 0, ||f|| = 1} has value
    # sqrt(K(z,z) (1 - |k(z,v)|^2)) with k the normalized kernel
    t = K.cached_moments(w1)
    rng = np.random.default_rng(5)
    z = 0.95 * np.sqrt(rng.random(60)) * np.exp(2j * np.pi * rng.random(60))
    v = z + 0.3 * w1.tau(np.abs(z)) * np.exp(2j * np.pi * rng.random(60))
    k = np.abs(K.kernel_normalized(t, z, v))
    cand = np.asarray(L.candidate_ratio(t, z, v))
    assert np.all(cand <= np.sqrt(1 - k ** 2) * (1 + 1e-9))
    S = K.skwarczynski(t, z, v)
    assert np.all(np.sqrt(1 - k ** 2) <= math.sqrt(2) * S * (1 + 1e-12))
