"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import random
import time
from fractions import Fraction

import pytest
from oracles import bch_oracle, grid

from carnotkit.carnot_map import (
    CarnotMapJet,
    carnot_differential,
    check_chain_rule,
    check_inverse_rule,
    compose_jets,
    differential_checks,
    frame_decompose,
    in_carnot_coordinates,
    pansu_numeric,
)
from carnotkit.carnot_structure import HFrame, tangent_algebra_at, validate_filtration
from carnotkit.coords import eps_carnot, is_carnot, is_privileged, osculation_residual, pushforward_frame
from carnotkit.fixtures import (
    abelian_frame,
    dilation_map,
    frame_fixtures,
    group_fixtures,
    heisenberg_contact,
    heisenberg_cubic,
    heisenberg_frame,
    heisenberg_group,
    heisenberg_swap,
)
from carnotkit.groupoid import (
    GroupoidChart,
    Pair,
    TangentElem,
    TangentGroupoid,
    chart_coords,
    chart_inverse,
    chart_mult,
    check_axioms,
    connes_chart,
    connes_groupoid_chart,
    connes_transition,
    convergence_probe,
    invert_scaling,
    mult_scaling,
    transition,
    transition_remainder,
    transition_scaling,
)
from carnotkit.nilgroup import NilpotentGroup, validate_algebra
from carnotkit.wpoly import WPoly, WPolyMap, WPolyVectorField, hom_part

F = Fraction
GRID = (-2, -1, 0, F(1, 2), 1, 2)
TS = (F(-2), F(1, 2), F(3))


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else ""))
        assert ok, detail

    return emit


def _triples(n: int, count: int, seed: int):
    pts = grid(n, GRID)
    rng = random.Random(seed)
    return [(rng.choice(pts), rng.choice(pts), rng.choice(pts)) for _ in range(count)]


def _shear(n: int, ws) -> WPolyMap:
    """``(x1, x2 + x1^2, x3 + x1 x2, ...)``: a nonlinear chart with polynomial inverse."""
    x = [WPoly.var(i, ws) for i in range(n)]
    comps = [x[0]] + [x[k] + x[0] * (x[k - 1] if k > 1 else x[0]) for k in range(1, n)]
    return WPolyMap(tuple(comps), ws)


def _sample_point(n: int, k: int) -> tuple:
    return tuple(F((k + i) % 3, 2) for i in range(n))


# ---------------------------------------------------------------------------


def test_01_group_law(verdict):
    failures = []
    counts = {}
    for name, g in group_fixtures().items():
        n = g.n
        total = 6 ** (3 * n)
        triples = _triples(n, min(total, 10_000), seed=n)
        counts[name] = len(triples)
        e = g.identity()
        for x, y, z in triples:
            if g.mul(g.mul(x, y), z) != g.mul(x, g.mul(y, z)):
                failures.append(f"{name}: associativity at {x},{y},{z}")
                break
            if g.mul(x, e) != x or g.mul(e, x) != x or g.mul(x, g.inv(x)) != e or g.mul(g.inv(x), x) != e:
                failures.append(f"{name}: unit/inverse at {x}")
                break
        # the law itself against the free-algebra BCH oracle
        alg = g.algebra
        for x, y, _ in triples[:200]:
            if g.mul(x, y) != bch_oracle(alg.L, n, alg.r, x, y):
                failures.append(f"{name}: law differs from the BCH oracle at {x},{y}")
                break
    h = heisenberg_group()
    e = group_fixtures()["engel4"]
    if h.mul((1, 0, 0), (0, 1, 0)) != (1, 1, F(1, 2)):
        failures.append("Heisenberg example")
    if e.mul((1, 0, 0, 0), (0, 1, 0, 0)) != (1, 1, F(1, 2), F(1, 12)):
        failures.append("Engel example")
    verdict(1, "Dynkin group law: associativity, unit, inverse, examples", not failures,
            "; ".join(failures) or f"triples {counts}")


def test_02_dilation_automorphism(verdict):
    failures = []
    groups = dict(group_fixtures())
    for name, frame in frame_fixtures().items():
        a = (0,) * frame.n
        groups[f"tangent group of {name}"] = NilpotentGroup(tangent_algebra_at(frame, a))
    for name, g in groups.items():
        for x, y, _ in _triples(g.n, 150, seed=2):
            for t in TS:
                if g.dilate(t, g.mul(x, y)) != g.mul(g.dilate(t, x), g.dilate(t, y)):
                    failures.append(f"{name}: t={t}, x={x}, y={y}")
                    break
    verdict(2, "dilations are automorphisms for t in {-2, 1/2, 3}", not failures,
            "; ".join(failures[:3]) or f"{len(groups)} groups")


def test_03_eps_carnot(verdict):
    failures = []
    for name, frame in frame_fixtures().items():
        for k in range(3):
            a = _sample_point(frame.n, k)
            e = eps_carnot(frame, a)
            rep = is_carnot(pushforward_frame(frame, e.change))
            if not rep.ok:
                failures.append(f"{name} at {a}: {rep}")
    h = heisenberg_group()
    frame = heisenberg_frame()
    ys = grid(3, GRID)
    for y in ys:
        expected = h.left_translation_jet(h.inv(y))
        if eps_carnot(frame, y).as_map() != expected:
            failures.append(f"eps_y != y^-1 . x at y={y}")
            break
    verdict(3, "eps-Carnot output is Carnot; eps_y(x) = y^-1.x on the Heisenberg grid", not failures,
            "; ".join(failures[:3]) or f"{len(ys)} basepoints exact")


def test_04_osculation(verdict):
    failures = []
    orders = {}
    groups = {"abelian2", "heisenberg3", "engel_group"}
    for name, frame in frame_fixtures().items():
        a = (0,) * frame.n
        carnot = pushforward_frame(frame, eps_carnot(frame, a).change)
        res = osculation_residual(carnot)
        orders[name] = res.order
        if not res.ok or (res.order is not None and res.order < 1):
            failures.append(f"{name}: order {res.order}")
        if name in groups and res.order is not None:
            failures.append(f"{name}: residual does not vanish")
    # exact version on the group fixtures: eps_y is left translation by y^-1 as polynomials
    for name, frame in frame_fixtures().items():
        if name not in groups:
            continue
        g = NilpotentGroup(tangent_algebra_at(frame))
        for y in grid(frame.n, (-1, F(1, 2), 2))[::7]:
            if eps_carnot(frame, y).as_map() != g.left_translation_jet(g.inv(y)):
                failures.append(f"{name}: eps_y differs from (-y).x at y={y}")
                break
    verdict(4, "eps_y(x) - (-y).x has weighted order >= 1; vanishes on groups", not failures,
            "; ".join(failures) or "orders " + ", ".join(f"{k}={'0-residual' if v is None else v}" for k, v in orders.items()))


def test_05_carnot_differential(verdict):
    H = heisenberg_frame()
    failures = []
    maps = {"swap": (heisenberg_swap(), (1, 0, 1)), "contact": (heisenberg_contact(), (1, 2, 0)),
            "dilation": (dilation_map(F(3, 2)), (0, 1, 1)), "cubic": (heisenberg_cubic(), (0, 1, 2))}
    samples = grid(3, GRID)[::5]
    for name, (phi, a) in maps.items():
        d = carnot_differential(CarnotMapJet(phi, H, H, a))
        rep = differential_checks(d, samples)
        if not rep.ok:
            failures.append(f"{name}: {rep}")
    # three composable maps: contact, then swap, then a dilation
    m1 = CarnotMapJet(heisenberg_contact(), H, H, (1, 0, 0))
    m2 = CarnotMapJet(heisenberg_swap(), H, H, m1.image)
    m3 = CarnotMapJet(dilation_map(2), H, H, compose_jets(m1, m2).image)
    for first, second in ((m1, m2), (m2, m3), (compose_jets(m1, m2), m3)):
        rep = check_chain_rule(first, second)
        if not rep.ok:
            failures.append(str(rep))
    for phi in (heisenberg_swap(), dilation_map(F(-1, 2))):
        rep = check_inverse_rule(CarnotMapJet(phi, H, H, (1, -1, 2)))
        if not rep.ok:
            failures.append(str(rep))
    verdict(5, "Carnot differential: blocks, homomorphism, chain and inverse rules", not failures,
            "; ".join(failures) or f"{len(maps)} maps, 3 chain-rule pairs, 2 automorphisms")


def test_06_tangent_approximation(verdict):
    H = heisenberg_frame()
    failures = []
    cases = [("swap", heisenberg_swap(), (1, 1, 1)), ("contact", heisenberg_contact(), (1, 0, 0)),
             ("contact", heisenberg_contact(), (-1, 2, F(1, 2))), ("dilation", dilation_map(2), (1, 2, 3)),
             ("cubic", heisenberg_cubic(), (0, 1, 2))]
    for name, phi, a in cases:
        m = in_carnot_coordinates(CarnotMapJet(phi, H, H, a))
        centred = m.centred()
        for ell in range(-2, 0):
            if any(not c.is_zero() for c in hom_part(centred, ell).components):
                failures.append(f"{name} at {a}: degree {ell} part is nonzero")
        if hom_part(centred, 0) != carnot_differential(m).as_map():
            failures.append(f"{name} at {a}: degree 0 part differs from the Carnot differential")
    verdict(6, "maps in Carnot coordinates: no negative parts, degree 0 = Carnot differential", not failures,
            "; ".join(failures) or f"{len(cases)} map/basepoint pairs")


def test_07_pansu(verdict):
    g = heisenberg_group()
    phi = heisenberg_cubic()
    basepoints = [(0, 0, 0), (0, 1, 2), (0, -1, F(1, 2)), (0, 2, -1), (0, F(1, 2), 3)]
    directions = [(1, 0, 0), (0, 1, 0), (1, 1, 1), (-1, 2, F(1, 2)), (F(1, 2), -1, 2)]
    ts = [F(1, 2**k) for k in range(3, 11)]
    start = time.perf_counter()
    worst_limit = 0.0
    worst_raw = 0.0
    min_slope = math.inf
    failures = []
    for a in basepoints:
        for y in directions:
            res = pansu_numeric(phi, g, g, a, y, ts)
            worst_limit = max(worst_limit, res.limit_deviation)
            worst_raw = max(worst_raw, res.deviations[-1])
            if not res.exact:
                min_slope = min(min_slope, res.slope)
                if res.slope < 0.9:
                    failures.append(f"slope {res.slope:.3f} at a={a}, y={y}")
            if res.limit_deviation > 1e-6:
                failures.append(f"limit deviation {res.limit_deviation:.2e} at a={a}, y={y}")
    elapsed = time.perf_counter() - start
    if elapsed >= 5:
        failures.append(f"runtime {elapsed:.2f}s")
    verdict(7, "Pansu limit matches the Carnot differential (25 cases)", not failures,
            "; ".join(failures[:3]) or f"extrapolated dev {worst_limit:.1e}, raw dev at 2^-10 {worst_raw:.1e}, "
            f"min slope {min_slope:.3f}, {elapsed:.2f}s")


def test_08_groupoid(verdict):
    failures = []
    for name, frame in frame_fixtures().items():
        n = frame.n
        ws = frame.weights.w
        G = TangentGroupoid(frame)
        pts = [_sample_point(n, k) for k in range(3)]
        fibre = [tuple(F(1, i + 1) for i in range(n)), tuple(F(-i, 2) for i in range(n)), (F(0),) * n]
        rep = check_axioms(G, pts, [F(1, 2), F(-3)], fibre)
        if not rep.ok:
            failures.append(f"{name}: {rep}")
        ident = GroupoidChart.identity(frame)
        chart = GroupoidChart(_shear(n, ws), frame, name="shear")
        for c in (ident, chart):
            for x in pts:
                for y in pts:
                    g = Pair(x, y, F(1, 3))
                    if chart_inverse(c, chart_coords(c, g)) != g:
                        failures.append(f"{name}/{c.name}: round trip {g}")
                for xi in fibre:
                    h = TangentElem(x, xi)
                    if chart_inverse(c, chart_coords(c, h)) != h:
                        failures.append(f"{name}/{c.name}: round trip {h}")
        X = chart.to_chart(pts[1])
        Y = tuple(F(1, i + 2) for i in range(n))
        Z = tuple(F(1) for _ in range(n))
        rem = transition_remainder(ident, chart, ident.to_chart(pts[1]))
        if tuple(rem.evaluate((), Y, F(1, 8))) != transition(ident, chart, (ident.to_chart(pts[1]), Y, F(1, 8)))[1]:
            failures.append(f"{name}: transition remainder disagrees with the chart value")
        for label, sc in (("transition", transition_scaling(ident, chart, ident.to_chart(pts[1]), Y)),
                          ("mult", mult_scaling(chart, X, Y, Z)),
                          ("invert", invert_scaling(chart, X, Y))):
            if not sc.ok(0.9):
                failures.append(f"{name}: {label} slope {sc.slope}")
    verdict(8, "groupoid axioms, chart round trips, remainder slopes >= 0.9", not failures,
            "; ".join(failures[:3]) or f"{len(frame_fixtures())} fixtures")


def test_09_connes_reduction(verdict):
    failures = []
    for n in (1, 2, 3):
        ws = (1,) * n
        x = [WPoly.var(i, ws) for i in range(n)]
        kappa = WPolyMap(tuple([x[0]] + [x[k] + x[k - 1] ** 2 for k in range(1, n)]), ws)
        chart = connes_groupoid_chart(kappa)
        ident = connes_groupoid_chart(WPolyMap.identity(ws))
        pts = [tuple(F(k + i, 3) for i in range(n)) for k in range(3)]
        for p in pts:
            for q in pts:
                for t in (F(1, 2), F(-1, 5)):
                    g = Pair(p, q, t)
                    if chart_coords(chart, g) != connes_chart(kappa, g):
                        failures.append(f"n={n}: chart at {g}")
                    pt = (p, q, t)
                    if transition(ident, chart, pt) != connes_transition(kappa, pt):
                        failures.append(f"n={n}: transition at {pt}")
                    z = tuple(F(1, i + 2) for i in range(n))
                    if chart_mult(chart, (p, q, z, t)) != (p, tuple(a + b for a, b in zip(q, z)), t):
                        failures.append(f"n={n}: multiplication at {pt}")
            h = TangentElem(p, tuple(F(1) for _ in range(n)))
            if chart_coords(chart, h) != connes_chart(kappa, h):
                failures.append(f"n={n}: chart at {h}")
            if transition(ident, chart, (p, h.xi, 0)) != connes_transition(kappa, (p, h.xi, 0)):
                failures.append(f"n={n}: transition at t = 0")
    # the abelian fixture's own frame gives the same formulas
    frame = abelian_frame(2)
    c = GroupoidChart.identity(frame)
    g = Pair((F(1), F(2)), (F(3), F(5)), F(1, 2))
    if chart_coords(c, g) != ((1, 2), (4, 6), F(1, 2)):
        failures.append("abelian fixture chart")
    verdict(9, "step-one charts, transitions and products are the classical formulas", not failures,
            "; ".join(failures[:3]) or "n = 1, 2, 3")


def test_10_chart_independence(verdict):
    failures = []
    ts_exact = [F(1, 2**k) for k in range(2, 10)]
    sequences = []
    fx = frame_fixtures()
    for name, x, xi in [("heisenberg3", (1, 0, 0), (1, 2, 3)), ("engel4", (0, 1, 0, 1), (1, -1, 2, F(1, 2))),
                        ("heisenberg_perturbed", (F(1, 2), 0, 1), (1, 1, -1)), ("abelian2", (1, 1), (2, -3)),
                        ("engel_group", (1, 0, 1, 0), (0, 1, 1, 1))]:
        frame = fx[name]
        c = GroupoidChart.identity(frame)
        x = tuple(F(v) for v in x)
        seq = [(x, chart_inverse(c, (x, xi, t)).y, t) for t in ts_exact]
        sequences.append((name, seq, True))
        if convergence_probe(c, seq).limit != TangentElem(x, tuple(F(v) for v in xi)):
            failures.append(f"{name}: limit is not the generating tangent element")
        floats = [(tuple(map(float, p)), tuple(map(float, q)), float(t)) for p, q, t in seq]
        sequences.append((name, floats, False))
    # divergent controls: y_l - x of size sqrt(t_l) in a weight-1 direction
    for name in ("heisenberg3", "heisenberg_perturbed"):
        n = fx[name].n
        seq = [((0.0,) * n, (math.sqrt(float(t)),) + (0.0,) * (n - 1), float(t)) for t in ts_exact]
        sequences.append((name, seq, False))
    verdicts = []
    worst = 0.0
    for name, seq, exact in sequences:
        frame = fx[name]
        c1 = GroupoidChart.identity(frame)
        c2 = GroupoidChart(_shear(frame.n, frame.weights.w), frame, name="shear")
        pts = 6 if exact else 7
        r1 = convergence_probe(c1, seq, points=pts)
        r2 = convergence_probe(c2, seq, points=pts)
        verdicts.append(r1.converges)
        if r1.converges != r2.converges:
            failures.append(f"{name}: verdicts differ")
            continue
        if not r1.converges:
            continue
        if exact:
            if r1.limit != r2.limit:
                failures.append(f"{name}: exact limits differ {r1.limit} vs {r2.limit}")
        else:
            d = max(abs(float(a) - float(b)) for a, b in zip(r1.limit.xi + r1.limit.x, r2.limit.xi + r2.limit.x))
            worst = max(worst, d)
            if d > 1e-9:
                failures.append(f"{name}: float limits differ by {d:.2e}")
    if len(sequences) < 10:
        failures.append("fewer than 10 sequences")
    verdict(10, "convergence verdicts and limits agree across two H-charts", not failures,
            "; ".join(failures) or f"{len(sequences)} sequences, {sum(verdicts)} convergent, "
            f"worst float disagreement {worst:.1e}")


def test_11_negative_controls(verdict):
    failures = []
    H = heisenberg_frame()
    dec = frame_decompose(CarnotMapJet(heisenberg_cubic(), H, H, (1, 0, 0)))
    if dec.carnot_at_point or "not-carnot-map" not in dec.report.codes():
        failures.append("non-Carnot map accepted")
    ws = (1, 1, 2)

    def field(*cs, ws=ws):
        return WPolyVectorField(tuple(c if isinstance(c, WPoly) else WPoly.const(c, ws) for c in cs))

    # linearly adapted, but x1 d4 in X1 has weighted degree 1 - 3 < -1
    w4 = (1, 1, 2, 3)
    x1 = WPoly.var(0, w4)
    bad_frame = HFrame(w4, (field(1, 0, 0, x1, ws=w4), field(0, 1, x1, 0, ws=w4),
                            field(0, 0, 1, 0, ws=w4), field(0, 0, 0, 1, ws=w4)))
    if is_privileged(bad_frame).codes() != ["not-privileged"]:
        failures.append(f"non-privileged coordinates: {is_privileged(bad_frame).codes()}")
    # a constant d3 term in X1 already fails linear adaptation
    unadapted = HFrame(ws, (field(1, 0, 1), field(0, 1, 0), field(0, 0, 1)))
    if is_privileged(unadapted).codes() != ["not-linearly-adapted"]:
        failures.append(f"unadapted coordinates: {is_privileged(unadapted).codes()}")
    rep = validate_algebra({(0, 1, 2): 1, (1, 0, 2): 1}, ws)
    if rep.codes() != ["antisymmetry"]:
        failures.append(f"corrupted constants: {rep.codes()}")
    engel_bad = HFrame(w4, (field(1, 0, 0, 0, ws=w4), field(0, 1, 0, x1, ws=w4),
                            field(0, 0, 1, 0, ws=w4), field(0, 0, 0, 1, ws=w4)))
    if validate_filtration(engel_bad).codes() != ["not-carnot-filtration"]:
        failures.append("bad filtration accepted")
    verdict(11, "negative controls rejected with their diagnostics", not failures, "; ".join(failures))
