import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnotkit.carnot_map import CarnotMapJet
from carnotkit.fixtures import (
    abelian_frame,
    dilation_map,
    engel_frame,
    heatlift,
    heisenberg_contact,
    heisenberg_frame,
    heisenberg_swap,
    perturbed_heisenberg_frame,
)
from carnotkit.groupoid import (
    GroupoidChart,
    NotComposable,
    Pair,
    TangentElem,
    TangentGroupoid,
    chart_coords,
    chart_inverse,
    chart_invert,
    chart_mult,
    check_axioms,
    check_morphism,
    compose_elements,
    connes_chart,
    connes_groupoid_chart,
    connes_transition,
    convergence_probe,
    invert_element,
    invert_remainder,
    invert_scaling,
    morphism_apply,
    mult_remainder,
    mult_scaling,
    transition,
    transition_remainder,
    transition_scaling,
)
from carnotkit.wpoly import WPoly, WPolyMap

W3 = (1, 1, 2)
F = Fraction
rat = st.fractions(min_value=-2, max_value=2, max_denominator=4)
pos_t = st.sampled_from([F(1, 2), F(1, 3), F(-1, 4), F(2), F(-1)])


def heis_chart():
    x = [WPoly.var(i, W3) for i in range(3)]
    return GroupoidChart(WPolyMap((x[0], x[1] + x[0] ** 2, x[2] + x[0] * x[1]), W3), heisenberg_frame(), name="k2")


def test_chart_examples():
    c = GroupoidChart.identity(heisenberg_frame())
    x = (F(1), F(2), F(3))
    assert chart_coords(c, Pair(x, x, F(1, 3))) == (x, (0, 0, 0), F(1, 3))
    t = F(1, 5)
    cval = F(7, 2)
    assert chart_coords(c, Pair((0, 0, 0), (t, t, t * t * cval), t)) == ((0, 0, 0), (1, 1, cval), t)


def test_chart_inverse_examples():
    c = heis_chart()
    X = (F(1), F(0), F(2))
    t = F(1, 4)
    g = chart_inverse(c, (X, (0, 0, 0), t))
    assert g.x == g.y == c.from_chart(X) and g.t == t
    xi = (F(1), F(-1), F(1, 2))
    elem = chart_inverse(c, (X, xi, 0))
    assert isinstance(elem, TangentElem)
    assert elem.xi == tuple(sum(a * b for a, b in zip(row, xi)) for row in c.K_inverse(elem.x))


@given(st.lists(rat, min_size=3, max_size=3), st.lists(rat, min_size=3, max_size=3), pos_t)
def test_chart_round_trip(x, y, t):
    c = heis_chart()
    g = Pair(tuple(x), tuple(y), t)
    assert chart_inverse(c, chart_coords(c, g)) == g
    h = TangentElem(tuple(x), tuple(y))
    assert chart_inverse(c, chart_coords(c, h)) == h


def test_transition_examples():
    c = heis_chart()
    X, Y, t = (F(1), F(0), F(1)), (F(1), F(1), F(1)), F(1, 8)
    assert transition(c, c, (X, Y, t)) == (X, Y, t)
    H = heisenberg_frame()
    # a linear automorphism, with the original frame kept as the chart frame
    mat = [[2, 0, 0], [1, 1, 0], [0, 0, 2]]
    A = GroupoidChart(WPolyMap.linear(mat, W3), H, chart_frame=H, name="A")
    ident = GroupoidChart.identity(H)
    Xp, Yp, tp = transition(ident, A, (X, Y, 0))
    assert Xp == (2, 1, 2) and tp == 0
    assert A.K(X) == mat
    assert Yp == (2, 2, 2)
    # with the pushed-forward frame the tangent coordinates do not move
    A2 = GroupoidChart(WPolyMap.linear([[2, 0, 0], [1, 1, 0], [0, 0, 3]], W3), H, name="A2")
    assert transition(ident, A2, (X, Y, 0)) == ((2, 1, 3), Y, 0)


def test_transition_remainder_is_constructed():
    c1 = GroupoidChart.identity(heisenberg_frame())
    c2 = heis_chart()
    X = (F(1), F(0), F(1))
    rem = transition_remainder(c1, c2, X)
    Y = (F(1), F(1), F(1))
    for t in (F(1, 2), F(1, 16)):
        assert tuple(rem.evaluate((), Y, t)) == transition(c1, c2, (X, Y, t))[1]
    sc = transition_scaling(c1, c2, X, Y)
    assert sc.slope == pytest.approx(1.0, abs=0.05)


def test_abelian_connes_reduction():
    ws = (1, 1)
    x = [WPoly.var(i, ws) for i in range(2)]
    kappa = WPolyMap((x[0] + x[1] ** 2, x[1]), ws)
    chart = connes_groupoid_chart(kappa)
    ident = connes_groupoid_chart(WPolyMap.identity(ws))
    for g in [Pair((F(1), F(2)), (F(0), F(1)), F(1, 3)), TangentElem((F(1), F(-1)), (F(2), F(1, 2)))]:
        assert chart_coords(chart, g) == connes_chart(kappa, g)
    pt = ((F(1), F(2)), (F(3), F(-1)), F(1, 4))
    assert transition(ident, chart, pt) == connes_transition(kappa, pt)
    X, Y, Z, t = (F(1), F(1)), (F(1), F(0)), (F(2), F(3)), F(1, 7)
    assert chart_mult(chart, (X, Y, Z, t)) == (X, (F(3), F(3)), t)


def test_groupoid_compose_examples():
    G = TangentGroupoid(heisenberg_frame())
    x = (F(0), F(0), F(0))
    assert G.compose(TangentElem(x, (1, 0, 0)), TangentElem(x, (0, 1, 0))) == TangentElem(x, (1, 1, F(1, 2)))
    g = Pair((F(1), F(0), F(0)), (F(0), F(1), F(0)), F(1, 2))
    assert G.compose(G.unit(g.x, g.t), g) == g
    assert compose_elements(g, G.unit(g.y, g.t), G) == g
    with pytest.raises(NotComposable):
        G.compose(g, Pair(g.y, g.x, F(1, 3)))


def test_groupoid_invert_examples():
    g = Pair((1, 2, 3), (4, 5, 6), F(1, 2))
    assert invert_element(g) == Pair((4, 5, 6), (1, 2, 3), F(1, 2))
    h = TangentElem((0, 1, 0), (1, -2, 3))
    assert invert_element(h) == TangentElem((0, 1, 0), (-1, 2, -3))
    assert invert_element(invert_element(g)) == g


@pytest.mark.parametrize("frame", [abelian_frame(2), heisenberg_frame(), engel_frame(),
                                   perturbed_heisenberg_frame(), heatlift(heisenberg_frame())])
def test_axioms_on_fixtures(frame):
    n = frame.n
    pts = [tuple(F(k * (i + 1), 4) for i in range(n)) for k in (0, 1, -1)]
    fibre = [tuple(F(1, i + 1) for i in range(n)), tuple(F(-i, 2) for i in range(n)), (F(0),) * n]
    rep = check_axioms(TangentGroupoid(frame), pts, [F(1, 2), F(-2)], fibre)
    assert rep.ok, rep


def test_mult_examples():
    c = GroupoidChart.identity(heisenberg_frame())
    X, Y, t = (F(1), F(2), F(0)), (F(1), F(-1), F(1)), F(1, 3)
    assert chart_mult(c, (X, Y, (0, 0, 0), t))[1] == Y
    g = c.group_at(X)
    assert chart_mult(c, (X, Y, (F(1), F(1), F(0)), t))[1] == g.mul(Y, (1, 1, 0))
    ab = GroupoidChart.identity(abelian_frame(2))
    assert chart_mult(ab, ((F(1), F(1)), (F(1), F(2)), (F(3), F(4)), t))[1] == (4, 6)


def test_mult_theta_vanishes_on_groups():
    c = GroupoidChart.identity(heisenberg_frame())
    rem = mult_remainder(c, (F(1), F(2), F(3)), 4)
    assert all(p.is_zero() for p in rem.first_order().components)


def test_invert_examples():
    c = heis_chart()
    X, Y = (F(1), F(0), F(1)), (F(1), F(2), F(-1))
    assert chart_invert(c, (X, Y, 0))[1] == (-1, -2, 1)
    q, val, t = chart_invert(c, (X, (0, 0, 0), F(1, 2)))
    assert q == X and val == (0, 0, 0)
    g = GroupoidChart.identity(heisenberg_frame())
    assert all(p.is_zero() for p in invert_remainder(g, X, 4).first_order().components)
    for t in (F(1, 2), F(1, 5)):
        assert chart_invert(g, (X, Y, t))[1] == (-1, -2, 1)


def test_perturbed_frame_remainders_are_order_t():
    c = heis_chart()
    frame = perturbed_heisenberg_frame()
    c = GroupoidChart(c.kappa, frame, name="k2")
    X, Y, Z = (F(1), F(1), F(1)), (F(1), F(0), F(0)), (F(1), F(1), F(1))
    sc = mult_scaling(c, X, Y, Z)
    assert not sc.vanishes and sc.ok()
    sc = invert_scaling(c, X, (F(1), F(2), F(1)))
    assert not sc.vanishes and sc.ok()
    # the jet at truncation N agrees with the chart value up to t^(N + 1 - w_k)
    rem = mult_remainder(c, X, 4)
    errs = []
    for t in (F(1, 32), F(1, 64)):
        exact = chart_mult(c, (X, Y, Z, t))[1]
        errs.append(abs(float(exact[2] - rem.evaluate((), Y + Z, t)[2])))
    assert errs[1] < errs[0] / 6


def test_probe_examples():
    c1 = GroupoidChart.identity(heisenberg_frame())
    c2 = heis_chart()
    ts = [F(1, 2**k) for k in range(2, 10)]
    x = (F(1), F(0), F(0))
    xi = (F(1), F(2), F(3))
    seq = [(x, chart_inverse(c1, (c1.to_chart(x), xi, t)).y, t) for t in ts]
    r1, r2 = convergence_probe(c1, seq), convergence_probe(c2, seq)
    assert r1.converges and r1.limit == TangentElem(x, xi)
    assert r2.converges and r2.limit == r1.limit
    zero = (F(0), F(0), F(0))
    lin = [(zero, (t, F(0), F(0)), t) for t in ts]
    assert convergence_probe(c1, lin).limit == TangentElem(zero, (1, 0, 0))
    sqrt = [((0.0, 0.0, 0.0), (math.sqrt(float(t)), 0.0, 0.0), float(t)) for t in ts]
    res = convergence_probe(c1, sqrt)
    assert not res.converges and "divergent" in res.report.codes()


def test_morphism_examples():
    H = heisenberg_frame()
    ident = CarnotMapJet(WPolyMap.identity(W3), H, H)
    g = Pair((F(1), F(0), F(0)), (F(0), F(1), F(0)), F(1, 2))
    assert morphism_apply(ident, g) == g
    lam = F(3)
    dil = CarnotMapJet(dilation_map(lam), H, H)
    assert morphism_apply(dil, TangentElem((0, 0, 0), (1, 0, 0))) == TangentElem((0, 0, 0), (lam, 0, 0))
    samples = []
    for phi in (heisenberg_swap(), heisenberg_contact()):
        m = CarnotMapJet(phi, H, H)
        x, y, z = (F(1), F(0), F(1)), (F(0), F(1), F(2)), (F(2), F(1), F(0))
        samples = [(Pair(x, y, F(1, 2)), Pair(y, z, F(1, 2))),
                   (TangentElem(x, (1, 0, 0)), TangentElem(x, (0, 1, 1)))]
        assert check_morphism(m, samples).ok
