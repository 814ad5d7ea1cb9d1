from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from oracles import picard_flow, sym_bracket, sym_vars, to_sympy, weighted_truncate

from carnotkit.wpoly import (
    OrderViolation,
    TruncationError,
    WPoly,
    WPolyMap,
    WPolyVectorField,
    compose,
    flow_exp,
    flow_polynomial,
    hom_part,
    hom_parts,
    invert_map,
    lie_bracket,
    param_remainder,
    pullback_dilation,
    translate_poly,
    vf_components,
    weighted_order,
)

W3 = (1, 1, 2)


def xs(ws=W3, trunc=None):
    return [WPoly.var(i, ws, trunc) for i in range(len(ws))]


def field(*coeffs, ws=W3):
    return WPolyVectorField(tuple(c if isinstance(c, WPoly) else WPoly.const(c, ws) for c in coeffs))


coef = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def polys(draw, ws=W3, max_terms=4, max_exp=2):
    n = len(ws)
    terms = draw(st.dictionaries(st.tuples(*[st.integers(0, max_exp)] * n), coef, max_size=max_terms))
    return WPoly(ws, terms)


# ---------------------------------------------------------------------------
# arithmetic against sympy


@given(polys(), polys())
def test_ring_operations_match_sympy(p, q):
    v = sym_vars(3)
    assert to_sympy(p * q, v) == sp.expand(to_sympy(p, v) * to_sympy(q, v))
    assert to_sympy(p + q, v) == sp.expand(to_sympy(p, v) + to_sympy(q, v))
    assert to_sympy(p - q, v) == sp.expand(to_sympy(p, v) - to_sympy(q, v))


@given(polys(), polys())
def test_truncated_product_is_truncation_of_exact(p, q):
    v = sym_vars(3)
    N = 3
    got = p.truncate(N) * q.truncate(N)
    assert got.trunc == N
    assert to_sympy(got, v) == weighted_truncate(to_sympy(p, v) * to_sympy(q, v), v, W3, N)


@given(polys(), st.lists(coef, min_size=3, max_size=3))
def test_translate_matches_substitution(p, a):
    v = sym_vars(3)
    expected = sp.expand(to_sympy(p, v).subs({vi: vi + sp.Rational(ai.numerator, ai.denominator)
                                              for vi, ai in zip(v, a)}, simultaneous=True))
    assert to_sympy(translate_poly(p, a), v) == expected


@given(polys(), polys(), polys(), polys(max_terms=3))
def test_composition_matches_sympy(p1, p2, p3, outer):
    v = sym_vars(3)
    psi = WPolyMap((p1, p2, p3), W3)
    phi = WPolyMap((outer,), (1,))
    got = compose(phi, psi).components[0]
    sub = {vi: to_sympy(pi, v) for vi, pi in zip(v, (p1, p2, p3))}
    assert to_sympy(got, v) == sp.expand(to_sympy(outer, v).subs(sub, simultaneous=True))


# ---------------------------------------------------------------------------
# homogeneous parts and orders


def test_hom_part_examples():
    x = xs()
    ident = WPolyMap.identity(W3)
    assert hom_part(ident, 0) == ident
    theta = WPolyMap((x[0], x[1], x[0] * x[1] + x[0] ** 3), W3)
    assert hom_part(theta, 0) == WPolyMap((x[0], x[1], x[0] * x[1]), W3)
    zero = WPoly.zero(W3)
    assert hom_part(theta, 1) == WPolyMap((zero, zero, x[0] ** 3), W3)
    parts = hom_parts(theta)
    assert sorted(parts) == [0, 1]


def test_weighted_order_examples():
    x = xs()
    zero = WPoly.zero(W3)
    assert weighted_order(WPolyMap.identity(W3)) == 0
    assert weighted_order(WPolyMap((zero, zero, x[0]), W3)) == -1
    assert weighted_order(WPolyMap((x[0] ** 2, zero, zero), W3)) == 1
    with pytest.raises(TruncationError, match="order above truncation"):
        weighted_order(WPolyMap((zero, zero, zero), W3))


def test_vf_components_examples():
    x = xs()
    d1 = WPolyVectorField.coordinate(0, W3)
    assert vf_components(d1) == {-1: d1}
    heis = field(1, 0, -x[1] / 2)
    assert vf_components(heis) == {-1: heis}
    pert = field(1 + x[2], 0, 0)
    comps = vf_components(pert)
    assert comps[-1] == d1
    assert comps[1] == field(x[2], 0, 0)


@given(st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=5))
def test_pullback_dilation_scales_homogeneous_parts(t):
    x = xs()
    f = field(1 + x[2], 0, -x[1] / 2 + x[0] ** 3)
    pulled = pullback_dilation(f, t)
    comps = vf_components(f)
    expected = WPolyVectorField.zero(W3)
    for deg, part in comps.items():
        expected = expected + part.scale(t**deg)
    assert pulled == expected


# ---------------------------------------------------------------------------
# vector fields


def test_lie_bracket_examples():
    x = xs()
    d1 = WPolyVectorField.coordinate(0, W3)
    d2 = WPolyVectorField.coordinate(1, W3)
    assert lie_bracket(d1, d2) == WPolyVectorField.zero(W3)
    X1 = field(1, 0, -x[1] / 2)
    X2 = field(0, 1, x[0] / 2)
    assert lie_bracket(X1, X2) == WPolyVectorField.coordinate(2, W3)
    assert lie_bracket(X1, X1) == WPolyVectorField.zero(W3)


@given(polys(), polys(), polys(), polys())
def test_lie_bracket_matches_sympy(a, b, c, d):
    v = sym_vars(3)
    zero = WPoly.zero(W3)
    X = WPolyVectorField((a, b, zero))
    Y = WPolyVectorField((c, zero, d))
    got = lie_bracket(X, Y)
    ref = sym_bracket([to_sympy(p, v) for p in X.coeffs], [to_sympy(p, v) for p in Y.coeffs], v)
    assert [to_sympy(p, v) for p in got.coeffs] == ref


# ---------------------------------------------------------------------------
# inversion


def test_invert_examples():
    x = xs()
    assert invert_map(WPolyMap.identity(W3)) == WPolyMap.identity(W3)
    phi = WPolyMap((x[0], x[1], x[2] + x[0] * x[1]), W3)
    assert invert_map(phi) == WPolyMap((x[0], x[1], x[2] - x[0] * x[1]), W3)
    A = [[2, 1, 0], [0, 1, 0], [0, 0, 3]]
    inv = invert_map(WPolyMap.linear(A, W3))
    assert inv == WPolyMap.linear([[Fraction(1, 2), Fraction(-1, 2), 0], [0, 1, 0], [0, 0, Fraction(1, 3)]], W3)


@given(coef, coef, coef, coef)
def test_triangular_inverse_round_trip(a, b, c, d):
    x = xs()
    phi = WPolyMap((x[0] + a * x[1], x[1], x[2] + b * x[0] ** 2 + c * x[0] * x[1] + d * x[1] ** 2), W3)
    psi = invert_map(phi)
    assert compose(phi, psi) == WPolyMap.identity(W3)
    assert compose(psi, phi) == WPolyMap.identity(W3)


def test_truncated_inverse_of_non_polynomial_inverse():
    # x -> x + x^2 on a weight-1 line has a power-series inverse
    ws = (1,)
    x = WPoly.var(0, ws)
    phi = WPolyMap((x + x * x,), ws)
    psi = invert_map(phi, trunc=5)
    v = sp.Symbol("x1")
    series = sp.series((-1 + sp.sqrt(1 + 4 * v)) / 2, v, 0, 6).removeO()
    assert to_sympy(psi.components[0], (v,)) == sp.expand(series)


# ---------------------------------------------------------------------------
# flows


def test_flow_of_coordinate_fields_is_identity():
    fields = [WPolyVectorField.coordinate(j, W3) for j in range(3)]
    assert flow_exp(fields, 4) == WPolyMap.identity(W3, 4)


def test_flow_of_heisenberg_fields_is_identity():
    x = xs()
    fields = [field(1, 0, -x[1] / 2), field(0, 1, x[0] / 2), field(0, 0, 1)]
    assert flow_polynomial(fields) == WPolyMap.identity(W3)


def test_flow_of_linear_field_is_exponential_series():
    ws = (1,)
    x = WPoly.var(0, ws)
    field1 = WPolyVectorField((x,))
    base = (Fraction(1),)
    jet = flow_exp([field1], trunc=6, base=base)
    s = sp.Symbol("x1")
    expected = sp.series(sp.exp(s), s, 0, 7).removeO()
    assert to_sympy(jet.components[0], (s,)) == sp.expand(expected)


def test_flow_matches_picard_oracle_on_engel_frame():
    ws = (1, 1, 2, 3)
    x = [WPoly.var(i, ws) for i in range(4)]
    fields = [field(1, 0, 0, 0, ws=ws), field(0, 1, x[0], x[0] * x[0] / 2, ws=ws),
              field(0, 0, 1, x[0], ws=ws), field(0, 0, 0, 1, ws=ws)]
    jet = flow_exp(fields, trunc=6)
    v = sym_vars(4)
    s = sp.symbols("s1:5")
    ref = picard_flow([[to_sympy(c, v) for c in f.coeffs] for f in fields], v, s, 4)
    ref0 = [sp.expand(r.subs({vi: 0 for vi in v})) for r in ref]
    for k in range(4):
        got = to_sympy(jet.components[k], s)
        assert got == weighted_truncate(ref0[k], s, ws, 6)


# ---------------------------------------------------------------------------
# parametrized remainders


def test_param_remainder_examples():
    ws = (1, 1, 2, 1, 1, 2)
    y = [WPoly.var(3 + i, ws) for i in range(3)]
    zero = WPoly.zero(ws)
    theta = WPolyMap(tuple(y), W3)
    rem = param_remainder(theta, 0, nparams=3)
    assert rem.evaluate((0, 0, 0), (1, 2, 3), Fraction(1, 7)) == (1, 2, 3)
    theta2 = WPolyMap((zero, zero, y[0] ** 2), W3)
    rem2 = param_remainder(theta2, 0, nparams=3)
    assert rem2.remainder.components[2] == WPoly.monomial((0, 0, 0, 2, 0, 0, 0), ws + (1,))
    theta3 = WPolyMap((zero, zero, y[0] ** 3), W3)
    rem3 = param_remainder(theta3, 1, nparams=3)
    assert rem3.remainder.components[2] == WPoly.monomial((0, 0, 0, 3, 0, 0, 0), ws + (1,))
    with pytest.raises(OrderViolation):
        param_remainder(theta3, 2, nparams=3)


@given(st.fractions(min_value=Fraction(1, 8), max_value=2, max_denominator=9),
       st.lists(coef, min_size=3, max_size=3))
def test_param_remainder_identity(t, yv):
    x = xs()
    theta = WPolyMap((x[0] + x[1] ** 2, x[1], x[2] + x[0] ** 3 + x[0] * x[1]), W3)
    rem = param_remainder(theta, 0)
    scaled = theta(tuple(v * t**w for v, w in zip(yv, W3)))
    direct = tuple(v / t**w for v, w in zip(scaled, W3))
    assert rem.evaluate((), yv, t) == direct
    assert rem.at_t_zero() == hom_part(theta, 0)
