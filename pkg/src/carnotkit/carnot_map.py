"""Maps between Carnot manifolds: frame decomposition, Carnot differentials and Pansu derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from . import _linalg
from .carnot_structure import HFrame, tangent_algebra_at
from .coords import CoordinateChange, eps_carnot, is_carnot, pushforward_frame
from .nilgroup import GradedNilpotentAlgebra, NilpotentGroup
from .report import Report
from .weights import WeightSequence, as_point, dilate
from .wpoly import (
    ParamRemainder,
    Trunc,
    TruncationError,
    WPoly,
    WPolyMap,
    compose,
    compose_polys,
    hom_part,
    invert_map,
    matrix_inverse_series,
    min_trunc,
    param_remainder,
    translate_poly,
    weighted_order,
)


class NotCarnotMap(ValueError):
    pass


@dataclass(frozen=True)
class CarnotMapJet:
    """``phi`` from the patch of ``source`` to the patch of ``target``, studied at ``basepoint``."""

    phi: WPolyMap
    source: HFrame
    target: HFrame
    basepoint: tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        n = self.source.n
        if self.phi.n_source != n or self.phi.n_target != self.target.n:
            raise ValueError("map shape does not match the frames")
        if self.phi.source_weights != self.source.weights.w or self.phi.target_weights != self.target.weights.w:
            raise ValueError("map weights do not match the frames")
        a = as_point(self.basepoint or (0,) * n, n)
        object.__setattr__(self, "basepoint", a)
        if not self.phi.is_exact() and any(v != 0 for v in a):
            raise TruncationError("a truncated map is a jet at the origin; basepoint must be 0")

    @property
    def image(self) -> tuple[Fraction, ...]:
        """``a' = phi(a)``."""
        return tuple(self.phi(self.basepoint))

    def centred(self) -> WPolyMap:
        """``u -> phi(a + u) - phi(a)``."""
        a = self.basepoint
        img = self.image
        comps = tuple(translate_poly(c, a) - v if c.trunc is None else c - v
                      for c, v in zip(self.phi.components, img))
        return WPolyMap(comps, self.phi.target_weights)


@dataclass(frozen=True)
class CDecomposition:
    """``phi'(x) X_j = sum_k c_jk(x) X'_k(phi(x))``; ``c`` is keyed ``(j, k)`` in ``u = x - a``."""

    c: Mapping[tuple[int, int], WPoly]
    basepoint: tuple[Fraction, ...]
    is_carnot_map: bool
    carnot_at_point: bool
    report: Report = field(default_factory=lambda: Report("Carnot map"))

    def at(self, point: Sequence | None = None) -> list[list[Fraction]]:
        """Matrix ``[j][k]`` of ``c_jk`` at ``point`` (default: the basepoint)."""
        u = (0,) * len(self.basepoint) if point is None else tuple(
            Fraction(p) - b for p, b in zip(point, self.basepoint))
        nj = 1 + max(j for j, _ in self.c)
        nk = 1 + max(k for _, k in self.c)
        return [[self.c[(j, k)].evaluate(u) for k in range(nk)] for j in range(nj)]


def frame_decompose(m: CarnotMapJet, trunc: Trunc = None) -> CDecomposition:
    """Solve for ``c_jk`` by series inversion of the target frame matrix along ``phi``.

    ``is_carnot_map`` is the jet-level condition (no ``c_jk`` with ``w'_k > w_j``);
    ``carnot_at_point`` only asks that those coefficients vanish at the basepoint.
    """
    src = m.source.recentred(m.basepoint)
    tgt_frame = m.target.recentred(m.image)
    ws = src.weights.w
    wt = tgt_frame.weights.w
    n, n2 = src.n, tgt_frame.n
    if trunc is None:
        trunc = 2 * max(src.r, tgt_frame.r)
    phit = m.centred()
    images = list(phit.components)
    tmat = [[compose_polys([tgt_frame.fields[k].coeffs[l]], images)[0] for k in range(n2)] for l in range(n2)]
    try:
        tinv = matrix_inverse_series(tmat, trunc)
    except _linalg.SingularMatrixError as exc:
        raise NotCarnotMap("target frame matrix is singular at the image point") from exc
    jac = phit.jacobian()
    c: dict[tuple[int, int], WPoly] = {}
    rep = Report("Carnot map")
    jet_ok = True
    point_ok = True
    for j, f in enumerate(src.fields):
        push = []
        for l in range(n2):
            acc = WPoly.zero(ws)
            for i in range(n):
                if not f.coeffs[i].is_zero() and not jac[l][i].is_zero():
                    acc = acc + jac[l][i] * f.coeffs[i]
            push.append(acc)
        for k in range(n2):
            acc = WPoly.zero(ws)
            for l in range(n2):
                if not tinv[k][l].is_zero() and not push[l].is_zero():
                    acc = acc + tinv[k][l] * push[l]
            c[(j, k)] = acc
            if wt[k] > ws[j] and not acc.is_zero():
                jet_ok = False
                mon, val = acc.sorted_terms()[0]
                where = "at the basepoint" if acc.constant_term() != 0 else "near the basepoint"
                if acc.constant_term() != 0:
                    point_ok = False
                rep.add("not-carnot-map",
                        f"phi' X_{j + 1} has a component c_{j + 1}{k + 1} = {val} * u^{mon} (+...) along "
                        f"X'_{k + 1} of weight {wt[k]} > {ws[j]} {where}")
    return CDecomposition(c, m.basepoint, jet_ok, point_ok, rep)


@dataclass(frozen=True)
class CarnotDifferential:
    """Block matrix ``D[k][j] = c_jk(a)`` on ``w_j = w'_k`` between tangent algebras."""

    matrix: tuple[tuple[Fraction, ...], ...]
    source: GradedNilpotentAlgebra
    target: GradedNilpotentAlgebra

    def __call__(self, xi: Sequence) -> tuple:
        return tuple(_linalg.mat_vec(self.matrix, list(xi)))

    def matmul(self, other: "CarnotDifferential") -> "CarnotDifferential":
        """``self o other``."""
        prod_ = _linalg.mat_mul([list(r) for r in self.matrix], [list(r) for r in other.matrix])
        return CarnotDifferential(tuple(tuple(r) for r in prod_), other.source, self.target)

    def as_map(self, weights: Sequence[int] | None = None) -> WPolyMap:
        ws = self.source.weights.w if weights is None else tuple(weights)
        return WPolyMap.linear(self.matrix, ws, self.target.weights.w)

    def block_report(self) -> Report:
        rep = Report("block structure")
        ws, wt = self.source.weights.w, self.target.weights.w
        for k, row in enumerate(self.matrix):
            for j, v in enumerate(row):
                if v != 0 and ws[j] != wt[k]:
                    rep.add("block", f"entry ({k + 1},{j + 1}) = {v} joins weights {ws[j]} and {wt[k]}")
        return rep


def carnot_differential(m: CarnotMapJet, decomposition: CDecomposition | None = None,
                        strict: bool = True) -> CarnotDifferential:
    """Graded part of ``c_jk(a)``; with ``strict=False`` it is returned even where the map is not Carnot at ``a``."""
    dec = frame_decompose(m) if decomposition is None else decomposition
    if strict and not dec.carnot_at_point:
        raise NotCarnotMap(str(dec.report))
    ws = m.source.weights.w
    wt = m.target.weights.w
    mat = [[dec.c[(j, k)].constant_term() if ws[j] == wt[k] else Fraction(0) for j in range(len(ws))]
           for k in range(len(wt))]
    src_alg = tangent_algebra_at(m.source, m.basepoint)
    tgt_alg = tangent_algebra_at(m.target, m.image)
    return CarnotDifferential(tuple(tuple(r) for r in mat), src_alg, tgt_alg)


def _default_samples(n: int) -> list[tuple[Fraction, ...]]:
    vals = (Fraction(-1), Fraction(0), Fraction(1, 2), Fraction(2))
    pts = list(product(vals, repeat=n))
    step = max(1, len(pts) // 40)
    return pts[::step]


def differential_checks(d: CarnotDifferential, samples: Iterable[Sequence] | None = None) -> Report:
    """Homomorphism, Lie and dilation identities, exactly on samples and symbolically."""
    rep = d.block_report()
    rep.title = "Carnot differential"
    g = NilpotentGroup(d.source)
    h = NilpotentGroup(d.target)
    n = d.source.n
    pts = list(samples) if samples is not None else _default_samples(n)
    pairs = [(pts[i], pts[(7 * i + 3) % len(pts)]) for i in range(len(pts))]
    for x, y in pairs:
        if d(g.mul(x, y)) != h.mul(d(x), d(y)):
            rep.add("homomorphism", f"D(x.y) != D(x).D(y) at x={_fmt(x)}, y={_fmt(y)}")
            break
    for x, y in pairs:
        if d(d.source.bracket(x, y)) != tuple(d.target.bracket(d(x), d(y))):
            rep.add("lie", f"D[x,y] != [Dx,Dy] at x={_fmt(x)}, y={_fmt(y)}")
            break
    for t in (Fraction(-2), Fraction(1, 2), Fraction(3)):
        for x in pts[:5]:
            if d(dilate(t, x, d.source.weights)) != dilate(t, d(x), d.target.weights):
                rep.add("dilation", f"D does not commute with dilation by {t}")
                break
    # symbolic: D(law(x, y)) == law'(Dx, Dy) as polynomials
    ws2 = g.law.source_weights
    xs = [WPoly.var(i, ws2) for i in range(n)]
    ys = [WPoly.var(n + i, ws2) for i in range(n)]
    dx = _linalg.mat_vec(d.matrix, xs)
    dy = _linalg.mat_vec(d.matrix, ys)
    lhs = _linalg.mat_vec(d.matrix, list(g.law.components))
    rhs = compose_polys(h.law.components, [_as_poly(v, ws2) for v in dx + dy], None)
    if any(a != b for a, b in zip(lhs, rhs)):
        rep.add("homomorphism-symbolic", "D(x.y) != D(x).D(y) as polynomials")
    return rep


def _as_poly(v, ws) -> WPoly:
    return v if isinstance(v, WPoly) else WPoly.const(v, ws)


def _fmt(x: Sequence) -> str:
    return "(" + ", ".join(str(v) for v in x) + ")"


def compose_jets(first: CarnotMapJet, second: CarnotMapJet) -> CarnotMapJet:
    """``second o first``; ``second`` must be based at the image of ``first``."""
    if tuple(second.basepoint) != first.image:
        raise ValueError("second map must be based at the image of the first")
    return CarnotMapJet(compose(second.phi, first.phi), first.source, second.target, first.basepoint)


def inverse_jet(m: CarnotMapJet) -> CarnotMapJet:
    """The inverse map as an exact polynomial jet based at ``phi(a)``."""
    if not m.phi.is_exact():
        raise TruncationError("inverse_jet needs an exact map")
    psi = invert_map(m.centred())
    img = m.image
    ws = m.target.weights.w
    shifted = [translate_poly(c, [-v for v in img]) + b for c, b in zip(psi.components, m.basepoint)]
    return CarnotMapJet(WPolyMap(tuple(shifted), m.source.weights.w), m.target, m.source, img)


def check_chain_rule(first: CarnotMapJet, second: CarnotMapJet) -> Report:
    rep = Report("chain rule")
    d1 = carnot_differential(first)
    d2 = carnot_differential(second)
    d12 = carnot_differential(compose_jets(first, second))
    if d2.matmul(d1).matrix != d12.matrix:
        rep.add("chain-rule", f"D(psi o phi) = {d12.matrix} but D(psi) D(phi) = {d2.matmul(d1).matrix}")
    return rep


def check_inverse_rule(m: CarnotMapJet) -> Report:
    rep = Report("inverse rule")
    d = carnot_differential(m)
    dinv = carnot_differential(inverse_jet(m))
    try:
        expected = _linalg.mat_inv([list(r) for r in d.matrix])
    except _linalg.SingularMatrixError:
        rep.add("inverse-rule", "Carnot differential is not invertible")
        return rep
    if [list(r) for r in dinv.matrix] != expected:
        rep.add("inverse-rule", "D(phi^{-1}) at phi(a) differs from D(phi)(a)^{-1}")
    return rep


# ---------------------------------------------------------------------------
# tangent approximation


@dataclass(frozen=True)
class MapOsculation:
    """``phi(a + u) - phi(a) = D u + residual(u)`` in Carnot coordinates on both sides."""

    residual: WPolyMap
    order: int | None
    differential: CarnotDifferential
    rescaled: ParamRemainder
    report: Report

    @property
    def ok(self) -> bool:
        return self.report.ok

    def rescaled_value(self, x: Sequence, t) -> tuple:
        """``t^{-1}.phi(t.x)``, evaluated from the exact rescaled polynomial."""
        return tuple(self.rescaled.remainder(tuple(x) + (t,)))


def map_osculation_residual(m: CarnotMapJet) -> MapOsculation:
    rep = Report("map osculation")
    for label, frame, pt in (("source", m.source, m.basepoint), ("target", m.target, m.image)):
        chk = is_carnot(frame.recentred(pt) if frame.is_exact() else frame)
        if not chk.ok:
            rep.add("not-carnot-chart", f"{label} coordinates are not Carnot at the point: "
                    + "; ".join(i.message for i in chk.issues))
    if not rep.ok:
        raise NotCarnotMap(str(rep))
    d = carnot_differential(m)
    phit = m.centred()
    lin = d.as_map(phit.source_weights)
    for ell in range(-max(phit.target_weights), 0):
        part = hom_part(phit, ell)
        if any(not c.is_zero() for c in part.components):
            rep.add("negative-part", f"homogeneous part of degree {ell} is nonzero")
    if hom_part(phit, 0) != lin:
        rep.add("degree-zero-part", "degree 0 part differs from the Carnot differential")
    residual = phit - lin
    try:
        order = weighted_order(residual)
    except TruncationError:
        order = None
    if order is not None and order < 1:
        rep.add("osculation-order", f"residual has weighted order {order} < 1")
    rescaled = param_remainder(phit, 0)
    return MapOsculation(residual, order, d, rescaled, rep)


def in_carnot_coordinates(m: CarnotMapJet) -> CarnotMapJet:
    """The same map written in eps-Carnot coordinates at ``a`` and ``phi(a)`` (exact input only)."""
    e_src = eps_carnot(m.source, m.basepoint)
    e_tgt = eps_carnot(m.target, m.image)
    phi = compose(e_tgt.as_map(), compose(m.phi, e_src.inverse_map()))
    src = pushforward_frame(m.source, e_src.change)
    tgt = pushforward_frame(m.target, e_tgt.change)
    return CarnotMapJet(phi, src, tgt, (0,) * m.source.n)


@dataclass(frozen=True)
class ChartAction:
    chart: CoordinateChange
    frame: HFrame
    verdict: Report


def act_on_chart(m: CarnotMapJet, chart: CoordinateChange) -> ChartAction:
    """``D o kappa o phi^{-1}``, a chart at ``phi(a)`` for the target frame."""
    if tuple(chart.basepoint) != tuple(m.basepoint):
        raise ValueError("chart must be centred at the basepoint of the map")
    d = carnot_differential(m)
    dmat = [list(r) for r in d.matrix]
    try:
        dinv = _linalg.mat_inv(dmat)
    except _linalg.SingularMatrixError as exc:
        raise NotCarnotMap("Carnot differential is not invertible") from exc
    phit = m.centred()
    psi = invert_map(phit) if phit.is_exact() else invert_map(phit, trunc=phit.trunc)
    ws = m.target.weights.w
    a_map = WPolyMap.linear([list(r) for r in chart.linear], m.source.weights.w)
    a_inv = WPolyMap.linear(chart.linear_inverse(), m.source.weights.w)
    d_map = WPolyMap.linear(dmat, ws)
    d_inv = WPolyMap.linear(dinv, ws)
    fwd = compose(d_map, compose(chart.forward, compose(a_map, psi)))
    inv = compose(phit, compose(a_inv, compose(chart.inverse, d_inv)))
    off = tuple(_linalg.mat_vec(dmat, list(chart.offset)))
    new = CoordinateChange(m.image, tuple(_linalg.identity(len(ws))), fwd, inv, off)
    frame = pushforward_frame(m.target, new)
    verdict = is_carnot(frame)
    return ChartAction(new, frame, verdict)


# ---------------------------------------------------------------------------
# Pansu derivatives


@dataclass(frozen=True)
class PansuResult:
    ts: tuple
    values: tuple[tuple, ...]
    prediction: tuple
    deviations: tuple[float, ...]
    limit: tuple
    limit_deviation: float
    slope: float | None
    carnot_at_point: bool = True

    @property
    def exact(self) -> bool:
        """All finite-t values equal the prediction."""
        return all(dv == 0 for dv in self.deviations)


def _neville_at_zero(ts: Sequence, vals: Sequence):
    """Value at ``t = 0`` of the interpolating polynomial through ``(ts, vals)``."""
    p = list(vals)
    k = len(ts)
    for level in range(1, k):
        for i in range(k - level):
            t0, t1 = ts[i], ts[i + level]
            p[i] = (t1 * p[i] - t0 * p[i + 1]) / (t1 - t0)
    return p[0]


def pansu_numeric(phi: WPolyMap, source: NilpotentGroup, target: NilpotentGroup, a: Sequence, y: Sequence,
                  t_seq: Sequence | None = None, exact: bool = False, extrapolation_points: int = 4,
                  strict: bool = True) -> PansuResult:
    """Finite-``t`` values of ``delta_t^{-1}[phi(a)^{-1} . phi(a . delta_t y)]`` against ``D y``.

    In exponential coordinates both exponential maps are the identity, so the
    conjugated Carnot differential is the matrix ``D`` itself.  ``limit`` is a
    polynomial extrapolation to ``t = 0`` from the last few samples; ``slope``
    is the least-squares slope of ``log|value - D y|`` against ``log t``.
    With ``strict=False`` a map that is not Carnot at ``a`` is still compared
    with the graded part of its differential; ``carnot_at_point`` records it.
    """
    if t_seq is None:
        t_seq = [Fraction(1, 2**k) for k in range(3, 11)]
    ts = [Fraction(t) for t in t_seq]
    if any(t <= 0 for t in ts) or any(b >= a_ for a_, b in zip(ts, ts[1:])):
        raise ValueError("t_seq must be strictly decreasing and positive")
    m = CarnotMapJet(phi, HFrame.from_group(source), HFrame.from_group(target), a)
    dec = frame_decompose(m)
    d = carnot_differential(m, dec, strict=strict)
    ws, wt = source.weights, target.weights
    conv = (lambda v: Fraction(v)) if exact else float
    a_ = tuple(conv(v) for v in a)
    y_ = tuple(conv(v) for v in y)
    fa = tuple(conv(v) for v in phi(tuple(Fraction(v) for v in a)))
    fa_inv = tuple(-v for v in fa)
    pred = tuple(conv(v) for v in d(tuple(Fraction(v) for v in y)))
    values = []
    devs = []
    for t in ts:
        tt = conv(t)
        moved = source.mul(a_, dilate(tt, y_, ws))
        val = target.mul(fa_inv, phi(moved))
        val = dilate(1 / tt, val, wt)
        values.append(tuple(val))
        devs.append(float(max(abs(p - q) for p, q in zip(val, pred))))
    k = min(extrapolation_points, len(ts))
    tail_t = [conv(t) for t in ts[-k:]]
    limit = tuple(_neville_at_zero(tail_t, [v[i] for v in values[-k:]]) for i in range(len(pred)))
    limit_dev = float(max(abs(p - q) for p, q in zip(limit, pred)))
    pos = [(math.log(float(t)), math.log(dv)) for t, dv in zip(ts, devs) if dv > 0]
    slope = None
    if len(pos) >= 2:
        mx = sum(p[0] for p in pos) / len(pos)
        my = sum(p[1] for p in pos) / len(pos)
        num = sum((p[0] - mx) * (p[1] - my) for p in pos)
        den = sum((p[0] - mx) ** 2 for p in pos)
        slope = num / den if den else None
    return PansuResult(tuple(ts), tuple(values), pred, tuple(devs), limit, limit_dev, slope, dec.carnot_at_point)
