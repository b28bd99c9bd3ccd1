import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_kit.errors import BoundaryEscape, DegenerateFit, NotSelfMap, ParseError, PoleAtPoint
from bergman_kit.holomap import (Add, Const, Div, IntPow, Mul, Neg, SameMap, Sub, Var,
                                 angular_derivative, data_contact_order, eval_jet, evaluate,
                                 fold, order_of_contact_check, parse_map, self_map_check,
                                 to_string)

PHI = "(1+z^2)/2"
PSI = "(1+z^2)/2 + 0.001953125*(1-z^2)^5"


def test_parse_example_map():
    assert parse_map(PHI) == Div(Add(Const(1), IntPow(Var(), 2)), Const(2))


def test_parse_perturbed_map():
    m = parse_map(PSI)
    z = 0.3 + 0.4j
    assert evaluate(m, z) == pytest.approx((1 + z * z) / 2 + (1 - z * z) ** 5 / 512)


def test_precedence_and_associativity():
    z = 0.7 - 0.2j
    cases = {"-z^2": -(z ** 2), "2*z/4": 2 * z / 4, "1-z-z": 1 - z - z, "z^2^1": z ** 2,
             "(2+3i)*z": (2 + 3j) * z, "i*z": 1j * z, "3i": 3j, "2.5e-1*z": 0.25 * z}
    for text, ref in cases.items():
        assert complex(evaluate(parse_map(text), z)) == pytest.approx(ref), text


@pytest.mark.parametrize("text, pos", [("z^", 2), ("", 0), ("(z", 2), ("w+1", 0), ("z^1.5", 2)])
def test_parse_errors(text, pos):
    with pytest.raises(ParseError) as exc:
        parse_map(text)
    assert exc.value.position == pos


def _tree(depth):
    leaf = st.one_of(st.just(Var()),
                     st.builds(lambda a, b: Const(complex(a, b)),
                               st.floats(-5, 5, allow_nan=False), st.sampled_from([0.0, 0.5, -2.0])))
    if depth == 0:
        return leaf
    sub = _tree(depth - 1)
    return st.one_of(leaf, st.builds(Neg, sub), st.builds(Add, sub, sub), st.builds(Sub, sub, sub),
                     st.builds(Mul, sub, sub), st.builds(IntPow, sub, st.integers(0, 4)))


@settings(max_examples=100, deadline=None)
@given(_tree(5))
def test_print_parse_round_trip(tree):
    s = to_string(fold(tree))
    again = parse_map(s)
    assert to_string(again) == s
    assert again == parse_map(to_string(again))


def test_jet_examples():
    assert np.allclose(eval_jet(parse_map("z^2"), 1.0, 1).coeffs, [1, 2])
    assert np.allclose(eval_jet(parse_map(PHI), 1.0, 1).coeffs, [1, 1])
    d = parse_map(f"({PSI}) - ({PHI})")
    assert np.allclose(eval_jet(d, 1.0, 4).coeffs, 0, atol=1e-15)
    assert np.allclose(eval_jet(d, -1.0, 4).coeffs, 0, atol=1e-15)


def test_jet_exact_on_polynomials():
    coeffs = [1.0, -2.0, 0.5j, 3.0]
    m = parse_map("1 - 2*z + 0.5i*z^2 + 3*z^3")
    z0 = 0.2 + 0.1j
    shifted = np.polynomial.polynomial.polyval(z0, coeffs)
    j = eval_jet(m, z0, 5)
    assert j.coeffs[0] == pytest.approx(shifted)
    assert j.coeffs[3] == pytest.approx(3.0) and abs(j.coeffs[4]) < 1e-15


def test_jet_pole():
    with pytest.raises(PoleAtPoint):
        eval_jet(parse_map("1/(z-0.5)"), 0.5, 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 0.95), st.floats(0, 2 * np.pi))
def test_jet_matches_central_differences(r, th):
    m = parse_map("(1+z^2)/2 + 0.001953125*(1-z^2)^5 + z^3/(3-z)")
    z0 = r * cmath.exp(1j * th)
    h = 1e-5
    fd = (evaluate(m, z0 + h) - evaluate(m, z0 - h)) / (2 * h)
    d1 = eval_jet(m, z0, 1).derivative(1)
    assert abs(d1 - fd) <= 1e-6 * max(1.0, abs(d1))


def test_self_map_checks():
    assert self_map_check(parse_map("z"))["max_modulus"] == pytest.approx(1.0, abs=1e-5)
    assert self_map_check(parse_map(PHI))["max_modulus"] <= 1.0
    assert self_map_check(parse_map(PSI))["max_modulus"] <= 1.0
    with pytest.raises(NotSelfMap):
        self_map_check(parse_map("1.1*z"))


def test_angular_derivatives():
    assert angular_derivative(parse_map("z"), 1j)["extrapolated_liminf"] == pytest.approx(1.0)
    q = angular_derivative(parse_map("z^2"), 1.0)
    assert q["extrapolated_liminf"] == pytest.approx(2.0, abs=1e-6)
    assert angular_derivative(parse_map(PHI), 1.0)["extrapolated_liminf"] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(BoundaryEscape):
        angular_derivative(parse_map("2*z"), 1.0)


def test_contact_order_fits():
    fit = data_contact_order(parse_map(PHI), parse_map(PSI), 1.0)
    assert fit.slope == pytest.approx(5.0, abs=0.2) and fit.same_order == 4
    fit = data_contact_order(parse_map("z"), parse_map("z+0.001*(z-1)^2"), 1.0)
    assert fit.slope == pytest.approx(2.0, abs=0.05) and fit.same_order == 1
    assert data_contact_order(parse_map(PHI), parse_map(PHI), 1.0) is SameMap
    with pytest.raises(DegenerateFit):
        data_contact_order(parse_map(PHI), parse_map(PHI), 1.0, strict=True)


def test_order_of_contact():
    assert order_of_contact_check(parse_map(PHI), 1.0, 2)["infimum"] > 0.1
    ident = order_of_contact_check(parse_map("z"), 1.0, 1, half_angle=0.0, n_angles=1)
    assert ident["infimum"] == pytest.approx(1.0, rel=1e-6)
    assert order_of_contact_check(parse_map(PHI), 1.0, 0.5)["infimum"] < 1e-2
