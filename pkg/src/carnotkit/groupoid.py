"""The tangent groupoid of a Carnot patch: elements, charts, transitions and structure maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

from . import _linalg
from .carnot_map import CarnotMapJet, NotCarnotMap, carnot_differential, _neville_at_zero
from .carnot_structure import HFrame, tangent_algebra_at
from .coords import CoordinateChange, EpsCarnotMap, eps_carnot, eps_family_at
from .nilgroup import NilpotentGroup
from .report import Report
from .weights import dilate
from .wpoly import (
    ParamRemainder,
    WPoly,
    WPolyMap,
    WPolyVectorField,
    compose,
    compose_polys,
    param_remainder,
)


class OutOfDomain(ValueError):
    pass


class NotComposable(ValueError):
    pass


def _num(v):
    return v if isinstance(v, float) else Fraction(v)


def _pt(v: Sequence) -> tuple:
    return tuple(_num(c) for c in v)


@dataclass(frozen=True)
class Pair:
    """``(x, y, t)`` with ``t != 0``: an arrow from ``y`` to ``x`` in the open stratum."""

    x: tuple
    y: tuple
    t: object

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _pt(self.x))
        object.__setattr__(self, "y", _pt(self.y))
        object.__setattr__(self, "t", _num(self.t))
        if self.t == 0:
            raise ValueError("a pair needs t != 0; use TangentElem at t = 0")
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same dimension")


@dataclass(frozen=True)
class TangentElem:
    """``(x, xi)`` with ``xi`` in exponential coordinates of the tangent group at ``x``."""

    x: tuple
    xi: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _pt(self.x))
        object.__setattr__(self, "xi", _pt(self.xi))
        if len(self.x) != len(self.xi):
            raise ValueError("x and xi must have the same dimension")


GroupoidElement = Union[Pair, TangentElem]


# ---------------------------------------------------------------------------
# abstract groupoid


class TangentGroupoid:
    """The groupoid ``GM`` glued to ``M x M x R*`` for the patch carrying ``frame``.

    Tangent elements are written in the graded basis of ``frame`` at their
    basepoint, so the fibre over ``x`` is the group of ``tangent_algebra_at(frame, x)``.
    """

    def __init__(self, frame: HFrame):
        if not frame.is_exact():
            raise ValueError("the groupoid needs an exact frame")
        self.frame = frame
        self._groups: dict = {}

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def weights(self) -> tuple[int, ...]:
        return self.frame.weights.w

    def group_at(self, x: Sequence) -> NilpotentGroup:
        key = tuple(Fraction(v) for v in x)
        if key not in self._groups:
            self._groups[key] = NilpotentGroup(tangent_algebra_at(self.frame, key))
        return self._groups[key]

    def unit(self, x: Sequence, t) -> GroupoidElement:
        if t == 0:
            return TangentElem(x, (0,) * len(x))
        return Pair(x, x, t)

    def range(self, g: GroupoidElement) -> tuple:
        return (g.x, g.t) if isinstance(g, Pair) else (g.x, Fraction(0))

    def source(self, g: GroupoidElement) -> tuple:
        return (g.y, g.t) if isinstance(g, Pair) else (g.x, Fraction(0))

    def compose(self, g1: GroupoidElement, g2: GroupoidElement) -> GroupoidElement:
        return compose_elements(g1, g2, self)

    def invert(self, g: GroupoidElement) -> GroupoidElement:
        return invert_element(g)


def compose_elements(g1: GroupoidElement, g2: GroupoidElement, groupoid: TangentGroupoid) -> GroupoidElement:
    """``(x,y,t).(y,z,t) = (x,z,t)`` and ``(x,xi).(x,eta) = (x, xi.eta)``."""
    if isinstance(g1, Pair) and isinstance(g2, Pair):
        if g1.t != g2.t:
            raise NotComposable(f"t values differ: {g1.t} and {g2.t}")
        if g1.y != g2.x:
            raise NotComposable("source of the first element is not the range of the second")
        return Pair(g1.x, g2.y, g1.t)
    if isinstance(g1, TangentElem) and isinstance(g2, TangentElem):
        if g1.x != g2.x:
            raise NotComposable("tangent elements over different points")
        return TangentElem(g1.x, groupoid.group_at(g1.x).mul(g1.xi, g2.xi))
    raise NotComposable("elements lie in different strata")


def invert_element(g: GroupoidElement) -> GroupoidElement:
    if isinstance(g, Pair):
        return Pair(g.y, g.x, g.t)
    return TangentElem(g.x, tuple(-v for v in g.xi))


def check_axioms(groupoid: TangentGroupoid, points: Sequence[Sequence], ts: Sequence,
                 fibre: Sequence[Sequence]) -> Report:
    """Associativity, unit and inverse laws on every composable triple built from the samples."""
    rep = Report("groupoid axioms")
    for t in ts:
        for x in points:
            for y in points:
                g = Pair(x, y, t)
                if groupoid.compose(groupoid.unit(x, t), g) != g or groupoid.compose(g, groupoid.unit(y, t)) != g:
                    rep.add("unit", f"unit law fails for {g}")
                if groupoid.compose(g, groupoid.invert(g)) != groupoid.unit(x, t):
                    rep.add("inverse", f"g.g^-1 is not a unit for {g}")
                if groupoid.invert(groupoid.invert(g)) != g:
                    rep.add("inverse", f"inversion is not an involution on {g}")
                for z in points:
                    for u in points[:3]:
                        a, b, c = Pair(x, y, t), Pair(y, z, t), Pair(z, u, t)
                        lhs = groupoid.compose(groupoid.compose(a, b), c)
                        rhs = groupoid.compose(a, groupoid.compose(b, c))
                        if lhs != rhs:
                            rep.add("associativity", f"fails on {a}, {b}, {c}")
    for x in points:
        e = groupoid.unit(x, 0)
        for xi in fibre:
            g = TangentElem(x, xi)
            if groupoid.compose(e, g) != g or groupoid.compose(g, e) != g:
                rep.add("unit", f"unit law fails for {g}")
            if groupoid.compose(g, groupoid.invert(g)) != e:
                rep.add("inverse", f"g.g^-1 is not a unit for {g}")
            for eta in fibre:
                for zeta in fibre[:4]:
                    a, b, c = g, TangentElem(x, eta), TangentElem(x, zeta)
                    lhs = groupoid.compose(groupoid.compose(a, b), c)
                    rhs = groupoid.compose(a, groupoid.compose(b, c))
                    if lhs != rhs:
                        rep.add("associativity", f"fails on {a}, {b}, {c}")
    return rep


# ---------------------------------------------------------------------------
# charts


def push_frame_exact(frame: HFrame, kappa: WPolyMap, kappa_inverse: WPolyMap) -> HFrame:
    """``kappa_* X`` for a polynomial diffeomorphism with polynomial inverse, as an exact frame."""
    n = frame.n
    ws = frame.weights.w
    jac = kappa.jacobian()
    images = list(kappa_inverse.components)
    jac_back = [[compose_polys([jac[k][i]], images, None)[0] for i in range(n)] for k in range(n)]
    fields = []
    for f in frame.fields:
        vals = compose_polys(f.coeffs, images, None)
        comps = tuple(sum((jac_back[k][i] * vals[i] for i in range(n) if not vals[i].is_zero()), WPoly.zero(ws))
                      for k in range(n))
        fields.append(WPolyVectorField(comps))
    return HFrame(frame.weights, tuple(fields))


class GroupoidChart:
    """An H-chart: an exact polynomial chart ``kappa`` of the patch and an H-frame in chart coordinates.

    ``chart_frame`` defaults to ``kappa_* frame``.  ``K(x)`` is the graded matrix
    taking the basis of ``frame`` at ``x`` to that of ``chart_frame`` at ``kappa(x)``;
    it is the Carnot differential of ``kappa`` under these identifications.
    ``domain`` optionally restricts the patch (a predicate on points of ``M``).
    """

    def __init__(self, kappa: WPolyMap, frame: HFrame, chart_frame: HFrame | None = None,
                 kappa_inverse: WPolyMap | None = None, domain: Callable[[Sequence], bool] | None = None,
                 name: str = "chart"):
        if not kappa.is_exact():
            raise ValueError("chart map must be an exact polynomial")
        self.kappa = kappa
        self.kappa_inverse = (CoordinateChange.from_polynomial(kappa).global_inverse()
                              if kappa_inverse is None else kappa_inverse)
        self.frame = frame
        self.chart_frame = push_frame_exact(frame, kappa, self.kappa_inverse) if chart_frame is None else chart_frame
        self.domain = domain
        self.name = name
        self._eps: dict = {}
        self._k: dict = {}
        self._groups: dict = {}

    @classmethod
    def identity(cls, frame: HFrame, name: str = "identity") -> "GroupoidChart":
        ws = frame.weights.w
        ident = WPolyMap.identity(ws)
        return cls(ident, frame, frame, ident, name=name)

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def weights(self) -> tuple[int, ...]:
        return self.frame.weights.w

    def contains(self, x: Sequence) -> bool:
        return self.domain is None or bool(self.domain(x))

    def _require(self, x: Sequence, what: str) -> None:
        if not self.contains(x):
            raise OutOfDomain(f"{what} {tuple(str(v) for v in x)} is outside the domain of {self.name}")

    def to_chart(self, x: Sequence) -> tuple:
        return tuple(self.kappa(tuple(x)))

    def from_chart(self, X: Sequence) -> tuple:
        return tuple(self.kappa_inverse(tuple(X)))

    def eps(self, X: Sequence) -> EpsCarnotMap:
        """The eps-Carnot map of the chart frame at the chart point ``X``."""
        key = tuple(Fraction(v) for v in X)
        if key not in self._eps:
            self._eps[key] = eps_carnot(self.chart_frame, key)
        return self._eps[key]

    def K(self, x: Sequence) -> list[list[Fraction]]:
        key = tuple(Fraction(v) for v in x)
        if key not in self._k:
            m = CarnotMapJet(self.kappa, self.frame, self.chart_frame, key)
            self._k[key] = [list(r) for r in carnot_differential(m).matrix]
        return self._k[key]

    def K_inverse(self, x: Sequence) -> list[list[Fraction]]:
        return _linalg.mat_inv(self.K(x))

    def group_at(self, X: Sequence) -> NilpotentGroup:
        """Tangent group at the chart point ``X`` in the basis of the chart frame."""
        key = tuple(Fraction(v) for v in X)
        if key not in self._groups:
            self._groups[key] = NilpotentGroup(tangent_algebra_at(self.chart_frame, key))
        return self._groups[key]


def chart_coords(chart: GroupoidChart, g: GroupoidElement) -> tuple:
    """``(kappa(x), t^-1 . eps_{kappa(x)}(kappa(y)), t)`` or ``(kappa(x), K(x) xi, 0)``."""
    chart._require(g.x, "point")
    X = chart.to_chart(g.x)
    if isinstance(g, Pair):
        chart._require(g.y, "point")
        Y = chart.eps(X)(chart.to_chart(g.y))
        return X, dilate(1 / g.t, Y, chart.weights), g.t
    return X, tuple(_linalg.mat_vec(chart.K(g.x), list(g.xi))), Fraction(0)


def chart_inverse(chart: GroupoidChart, point: Sequence) -> GroupoidElement:
    X, Y, t = point
    x = chart.from_chart(X)
    chart._require(x, "point")
    if t == 0:
        return TangentElem(x, _linalg.mat_vec(chart.K_inverse(x), list(Y)))
    y = chart.from_chart(chart.eps(X).inverse(dilate(t, Y, chart.weights)))
    chart._require(y, "point")
    return Pair(x, y, t)


def transition(c1: GroupoidChart, c2: GroupoidChart, point: Sequence) -> tuple:
    """``gamma_2 o gamma_1^{-1}``; at ``t = 0`` this is ``(phi(X), K_2 K_1^{-1} Y, 0)``."""
    return chart_coords(c2, chart_inverse(c1, point))


def transition_map(c1: GroupoidChart, c2: GroupoidChart) -> WPolyMap:
    """``phi = kappa_2 o kappa_1^{-1}`` between the chart coordinates."""
    return compose(c2.kappa, c1.kappa_inverse)


def transition_remainder(c1: GroupoidChart, c2: GroupoidChart, X: Sequence) -> ParamRemainder:
    """``t^-1 . Phi(t . y) = remainder(y, t)`` with ``Phi = eps'_{phi(X)} o phi o eps_X^{-1}``.

    ``Phi`` is an exact polynomial, so the remainder is exact; its value at
    ``t = 0`` is the graded linear map and ``first_order()`` is ``Theta``.
    """
    X = tuple(Fraction(v) for v in X)
    phi = transition_map(c1, c2)
    e1 = c1.eps(X)
    e2 = c2.eps(phi(X))
    big = compose(e2.as_map(), compose(phi, e1.inverse_map()))
    return param_remainder(big, 0)


# ---------------------------------------------------------------------------
# multiplication and inversion in a chart


def chart_mult(chart: GroupoidChart, point: Sequence) -> tuple:
    """``(X, Y, Z, t) -> (X, Y.Z + t Theta, t)``; exactly ``(X, Y.Z, 0)`` at ``t = 0``."""
    X, Y, Z, t = point
    X = _pt(X)
    chart._require(chart.from_chart(X), "point")
    if t == 0:
        return X, chart.group_at(X).mul(Y, Z), Fraction(0)
    ws = chart.weights
    e = chart.eps(X)
    q = e.inverse(dilate(t, Y, ws))
    chart._require(chart.from_chart(q), "point")
    inner = chart.eps(q).inverse(dilate(t, Z, ws))
    chart._require(chart.from_chart(inner), "point")
    return X, dilate(1 / t, e(inner), ws), t


def chart_invert(chart: GroupoidChart, point: Sequence) -> tuple:
    """``(X, Y, t) -> (eps_X^{-1}(t.Y), t^-1 . eps_{eps_X^{-1}(t.Y)}(X), t)``; ``(X, -Y, 0)`` at ``t = 0``."""
    X, Y, t = point
    X = _pt(X)
    chart._require(chart.from_chart(X), "point")
    if t == 0:
        return X, tuple(-_num(v) for v in Y), Fraction(0)
    ws = chart.weights
    q = chart.eps(X).inverse(dilate(t, Y, ws))
    chart._require(chart.from_chart(q), "point")
    return q, dilate(1 / t, chart.eps(q)(X), ws), t


def _embed(p: WPoly, ring: Sequence[int], shift: int) -> WPoly:
    pad_before = (0,) * shift
    pad_after = (0,) * (len(ring) - shift - p.nvars)
    return WPoly(tuple(ring), {pad_before + m + pad_after: c for m, c in p.terms.items()}, None, _trusted=True)


def _centred_eps_inverse(e: EpsCarnotMap, ring: Sequence[int], shift: int) -> list[WPoly]:
    """``eps_X^{-1}(y) - X`` as polynomials in a block of ``ring``."""
    ainv = _linalg.mat_inv([list(r) for r in e.A])
    hinv = [_embed(c, ring, shift) for c in e.hat_inverse.components]
    n = len(hinv)
    return [sum((hinv[l] * ainv[k][l] for l in range(n)), WPoly.zero(tuple(ring))) for k in range(n)]


def mult_remainder(chart: GroupoidChart, X: Sequence, trunc: int | None = None) -> ParamRemainder:
    """Jet of ``t^-1 . eps_X(eps_q^{-1}(t.z))``, ``q = eps_X^{-1}(t.y)``, factored as a polynomial in ``(y, z, t)``.

    Built from the joint jets of the eps-Carnot family about ``X``; the value at
    ``t = 0`` is the group law of the tangent group and ``first_order()`` is ``Theta``
    (modulo the truncation order).
    """
    X = tuple(Fraction(v) for v in X)
    n = chart.n
    ws = chart.weights
    N = 2 * chart.frame.r if trunc is None else trunc
    fam = eps_family_at(chart.chart_frame, X, N)
    ring = (1,) * (2 * n)
    e = chart.eps(X)
    s_of_y = [p.truncate(N) for p in _centred_eps_inverse(e, ring, 0)]
    zs = [WPoly.var(n + i, ring, N) for i in range(n)]
    v = compose_polys(fam.inverse.components, s_of_y + zs)
    av = [sum((v[l] * e.A[k][l] for l in range(n)), WPoly.zero(ring, v[0].trunc)) for k in range(n)]
    hat = [_embed(c, (1,) * n, 0) for c in e.hat.components]
    h = compose_polys(hat, av)
    big = WPolyMap(tuple(h), ws).retag(ws + ws, min(N, h[0].trunc if h[0].trunc is not None else N))
    return param_remainder(big, 0)


def invert_remainder(chart: GroupoidChart, X: Sequence, trunc: int | None = None) -> ParamRemainder:
    """Jet of ``t^-1 . eps_q(X)``, ``q = eps_X^{-1}(t.y)``, factored as a polynomial in ``(y, t)``.

    Its value at ``t = 0`` is ``-y``.
    """
    X = tuple(Fraction(v) for v in X)
    n = chart.n
    ws = chart.weights
    N = 2 * chart.frame.r if trunc is None else trunc
    fam = eps_family_at(chart.chart_frame, X, N)
    ring = (1,) * n
    e = chart.eps(X)
    s_of_y = [p.truncate(N) for p in _centred_eps_inverse(e, ring, 0)]
    zero = [WPoly.zero(ring, N) for _ in range(n)]
    j = compose_polys(fam.forward.components, s_of_y + zero)
    big = WPolyMap(tuple(j), ws).retag(ws, min(N, j[0].trunc if j[0].trunc is not None else N))
    return param_remainder(big, 0)


def fitted_slope(ts: Sequence, deviations: Sequence[float]) -> float | None:
    """Least-squares slope of ``log(deviation)`` against ``log(t)`` over the positive deviations."""
    pts = [(math.log(abs(float(t))), math.log(d)) for t, d in zip(ts, deviations) if d > 0]
    if len(pts) < 2:
        return None
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    den = sum((p[0] - mx) ** 2 for p in pts)
    if den == 0:
        return None
    return sum((p[0] - mx) * (p[1] - my) for p in pts) / den


def _dev(a: Sequence, b: Sequence) -> float:
    return float(max(abs(p - q) for p, q in zip(a, b)))


@dataclass(frozen=True)
class ScalingResult:
    """``|F(t) - F(0)|`` along a sequence of ``t`` and its fitted log-log slope."""

    ts: tuple
    deviations: tuple[float, ...]
    slope: float | None

    @property
    def vanishes(self) -> bool:
        return all(d == 0 for d in self.deviations)

    def ok(self, threshold: float = 0.9) -> bool:
        return self.vanishes or (self.slope is not None and self.slope >= threshold)


def _default_ts() -> list[Fraction]:
    return [Fraction(1, 2**k) for k in range(2, 9)]


def transition_scaling(c1: GroupoidChart, c2: GroupoidChart, X: Sequence, Y: Sequence,
                       ts: Sequence | None = None) -> ScalingResult:
    ts = _default_ts() if ts is None else list(ts)
    base = transition(c1, c2, (X, Y, 0))[1]
    devs = tuple(_dev(transition(c1, c2, (X, Y, t))[1], base) for t in ts)
    return ScalingResult(tuple(ts), devs, fitted_slope(ts, devs))


def mult_scaling(chart: GroupoidChart, X: Sequence, Y: Sequence, Z: Sequence,
                 ts: Sequence | None = None) -> ScalingResult:
    ts = _default_ts() if ts is None else list(ts)
    base = chart_mult(chart, (X, Y, Z, 0))[1]
    devs = tuple(_dev(chart_mult(chart, (X, Y, Z, t))[1], base) for t in ts)
    return ScalingResult(tuple(ts), devs, fitted_slope(ts, devs))


def invert_scaling(chart: GroupoidChart, X: Sequence, Y: Sequence, ts: Sequence | None = None) -> ScalingResult:
    ts = _default_ts() if ts is None else list(ts)
    base = chart_invert(chart, (X, Y, 0))
    devs = []
    for t in ts:
        q, val, _ = chart_invert(chart, (X, Y, t))
        devs.append(max(_dev(val, base[1]), _dev(q, base[0])))
    return ScalingResult(tuple(ts), tuple(devs), fitted_slope(ts, devs))


# ---------------------------------------------------------------------------
# convergence towards the tangent stratum


@dataclass(frozen=True)
class ProbeResult:
    converges: bool
    limit: TangentElem | None
    rescaled: tuple[tuple, ...]
    report: Report


def convergence_probe(chart: GroupoidChart, sequence: Sequence[Sequence], points: int = 6,
                      ratio: float = 0.9, tol: float = 1e-6) -> ProbeResult:
    """Decide whether ``(x_l, y_l, t_l)`` converges to a tangent element, and find the limit.

    The rescaled coordinates ``t^-1 . eps_{kappa(x)}(kappa(y))`` must settle: their
    successive differences either vanish or shrink geometrically (ratio at
    most ``ratio``).  The limit is a polynomial extrapolation to ``t = 0`` from
    the last ``points`` terms, pulled back to the basis of the reference frame.
    For rational input the limit is snapped to the nearest rational of small
    height when it lies within ``1e-12`` of it.
    """
    rep = Report("convergence")
    raw = [(_pt(x), _pt(y), _num(t)) for x, y, t in sequence]
    floating = any(isinstance(v, float) for x, y, t in raw for v in x + y + (t,))
    # floats are converted exactly, so the only error left is the one already in the data
    seq = [(tuple(Fraction(v) for v in x), tuple(Fraction(v) for v in y), Fraction(t)) for x, y, t in raw]
    if len(seq) < 3:
        raise ValueError("need at least three terms")
    ts = [t for _, _, t in seq]
    if any(abs(b) >= abs(a) for a, b in zip(ts, ts[1:])):
        rep.add("t-not-decreasing", "|t_l| must decrease strictly towards 0")
    hats = []
    for x, y, t in seq:
        try:
            hats.append(chart_coords(chart, Pair(x, y, t))[1])
        except OutOfDomain as exc:
            rep.add("out-of-domain", str(exc))
            return ProbeResult(False, None, tuple(hats), rep)
    k = min(points, len(seq))
    tail_t = ts[-k:]
    n = chart.n
    x0 = tuple(_neville_at_zero(tail_t, [s[0][i] for s in seq[-k:]]) for i in range(n))
    y0 = tuple(_neville_at_zero(tail_t, [s[1][i] for s in seq[-k:]]) for i in range(n))
    if _dev(x0, y0) > tol:
        rep.add("endpoints-differ", f"x_l and y_l have different limits {x0} and {y0}")
    diffs = [_dev(b, a) for a, b in zip(hats, hats[1:])]
    tail = diffs[-(k - 1):] if k > 1 else diffs
    # differences below tol are data noise amplified by the rescaling, not a trend
    if any(d > tol for d in tail):
        ratios = [b / a if a > 0 else math.inf for a, b in zip(tail, tail[1:]) if a > 0 or b > 0]
        if not ratios or max(ratios) > ratio:
            rep.add("divergent", f"rescaled coordinates do not settle: successive differences {tail}")
    if not rep.ok:
        return ProbeResult(False, None, tuple(hats), rep)
    lim = tuple(_neville_at_zero(tail_t, [h[i] for h in hats[-k:]]) for i in range(n))
    if floating:
        xk = tuple(_exactish(float(v)) for v in x0)
        xi = tuple(float(v) for v in _linalg.mat_vec(chart.K_inverse(xk), list(lim)))
        return ProbeResult(True, TangentElem(xk, xi), tuple(tuple(float(v) for v in h) for h in hats), rep)
    lim = tuple(_snap(v) for v in lim)
    xk = tuple(_snap(v) for v in x0)
    xi = tuple(_linalg.mat_vec(chart.K_inverse(xk), list(lim)))
    return ProbeResult(True, TangentElem(xk, xi), tuple(hats), rep)


def _snap(v: Fraction) -> Fraction:
    f = v.limit_denominator(10**6)
    return f if abs(f - v) < Fraction(1, 10**12) else v


def _exactish(v):
    """Floats close to a simple rational are snapped to it (for basepoint lookups)."""
    if isinstance(v, float):
        f = Fraction(v).limit_denominator(10**6)
        return f if abs(float(f) - v) < 1e-12 else Fraction(v)
    return v


# ---------------------------------------------------------------------------
# morphisms


def morphism_apply(m: CarnotMapJet, g: GroupoidElement) -> GroupoidElement:
    """``(x, y, t) -> (phi(x), phi(y), t)`` and ``(x, xi) -> (phi(x), D(x) xi)``."""
    phi = m.phi
    if isinstance(g, Pair):
        return Pair(phi(g.x), phi(g.y), g.t)
    jet = CarnotMapJet(phi, m.source, m.target, g.x)
    d = carnot_differential(jet)
    return TangentElem(phi(g.x), d(g.xi))


def check_morphism(m: CarnotMapJet, samples: Sequence[tuple[GroupoidElement, GroupoidElement]]) -> Report:
    """``Phi(g.h) = Phi(g).Phi(h)``, ``Phi(g^-1) = Phi(g)^-1`` and units to units on composable samples."""
    rep = Report("groupoid morphism")
    src = TangentGroupoid(m.source)
    tgt = TangentGroupoid(m.target)
    for g, h in samples:
        try:
            lhs = morphism_apply(m, src.compose(g, h))
            rhs = tgt.compose(morphism_apply(m, g), morphism_apply(m, h))
        except NotCarnotMap as exc:
            rep.add("not-carnot-map", str(exc))
            continue
        if lhs != rhs:
            rep.add("multiplicative", f"Phi(g.h) != Phi(g).Phi(h) for g={g}, h={h}")
        if morphism_apply(m, src.invert(g)) != tgt.invert(morphism_apply(m, g)):
            rep.add("inverse", f"Phi(g^-1) != Phi(g)^-1 for g={g}")
        r, t = src.range(g)
        if morphism_apply(m, src.unit(r, t)) != tgt.unit(m.phi(r), t):
            rep.add("unit", f"Phi does not send the unit at {r} to a unit")
    return rep


# ---------------------------------------------------------------------------
# step one: the classical tangent groupoid


def connes_chart(kappa: WPolyMap, g: GroupoidElement) -> tuple:
    """``(kappa(x), t^-1 (kappa(y) - kappa(x)), t)`` and ``(kappa(x), kappa'(x) v, 0)``."""
    X = tuple(kappa(g.x))
    if isinstance(g, Pair):
        Y = kappa(g.y)
        return X, tuple((b - a) / g.t for a, b in zip(X, Y)), g.t
    jac = [[p.evaluate(g.x) for p in row] for row in kappa.jacobian()]
    return X, tuple(_linalg.mat_vec(jac, list(g.xi))), Fraction(0)


def connes_transition(phi: WPolyMap, point: Sequence) -> tuple:
    """``(phi(x), t^-1 (phi(x + t v) - phi(x)), t)`` and ``(phi(x), phi'(x) v, 0)``."""
    x, v, t = point
    X = tuple(phi(tuple(x)))
    if t == 0:
        jac = [[p.evaluate(tuple(x)) for p in row] for row in phi.jacobian()]
        return X, tuple(_linalg.mat_vec(jac, list(v))), Fraction(0)
    moved = phi(tuple(a + t * b for a, b in zip(x, v)))
    return X, tuple((b - a) / t for a, b in zip(X, moved)), t


def connes_groupoid_chart(kappa: WPolyMap, name: str = "chart") -> GroupoidChart:
    """The H-chart of a step-one patch whose frame on both sides is the coordinate frame."""
    ws = kappa.source_weights
    if any(w != 1 for w in ws):
        raise ValueError("the classical tangent groupoid needs all weights equal to 1")
    coord = HFrame.coordinate(ws)
    return GroupoidChart(kappa, coord, coord, name=name)
