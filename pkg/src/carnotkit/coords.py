"""Coordinate adaptation: linear adaptation, privileged and Carnot coordinates, eps-Carnot maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping, Sequence

from . import _linalg
from .carnot_structure import HFrame, SingularFrameError, tangent_algebra_at
from .nilgroup import GradedNilpotentAlgebra, NilpotentGroup
from .report import Report
from .weights import MultiIndex, WeightSequence, as_point, weighted_degree
from .wpoly import (
    Trunc,
    TruncationError,
    WPoly,
    WPolyMap,
    WPolyVectorField,
    compose,
    compose_polys,
    FlowError,
    InversionError,
    flow_exp,
    flow_jet,
    flow_polynomial,
    homogeneous_field,
    invert_map,
    matrix_inverse_series,
    min_trunc,
    translate_poly,
    vf_components,
    weighted_order,
)


class NotPrivileged(ValueError):
    def __init__(self, report: Report):
        super().__init__(str(report))
        self.report = report


class TriangularSolveError(RuntimeError):
    """The triangular system for the eps-Carnot coefficients is inconsistent."""


@dataclass(frozen=True)
class CoordinateChange:
    """``x -> offset + forward(A (x - basepoint))`` with inverse ``y -> basepoint + A^{-1} inverse(y - offset)``.

    ``forward`` and ``inverse`` are mutually inverse jets fixing the origin;
    the affine part is kept separately so that grading logic only ever runs in
    coordinates centred at the basepoint.
    """

    basepoint: tuple[Fraction, ...]
    linear: tuple[tuple[Fraction, ...], ...]
    forward: WPolyMap
    inverse: WPolyMap
    offset: tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        n = self.forward.n_target
        object.__setattr__(self, "basepoint", as_point(self.basepoint, n))
        object.__setattr__(self, "linear", tuple(tuple(Fraction(v) for v in row) for row in self.linear))
        object.__setattr__(self, "offset", as_point(self.offset or (0,) * n, n))
        if any(v != 0 for v in self.forward.constant()) or any(v != 0 for v in self.inverse.constant()):
            raise ValueError("forward and inverse parts must fix the origin")

    @classmethod
    def affine(cls, matrix: Sequence[Sequence], basepoint: Sequence, weights) -> "CoordinateChange":
        ws = tuple(weights)
        ident = WPolyMap.identity(ws)
        return cls(tuple(basepoint), tuple(tuple(r) for r in matrix), ident, ident)

    @classmethod
    def identity(cls, weights) -> "CoordinateChange":
        ws = tuple(weights)
        return cls.affine(_linalg.identity(len(ws)), (0,) * len(ws), ws)

    @classmethod
    def from_polynomial(cls, phi: WPolyMap, basepoint: Sequence | None = None,
                        inverse: WPolyMap | None = None) -> "CoordinateChange":
        """An exact polynomial diffeomorphism ``phi`` with polynomial inverse, centred at ``basepoint``."""
        if not phi.is_exact():
            raise TruncationError("from_polynomial needs an exact map")
        n = phi.n_target
        a = as_point(basepoint or (0,) * n, n)
        ws = phi.source_weights
        centred = WPolyMap(tuple(translate_poly(c, a) for c in phi.components), phi.target_weights)
        off = centred.constant()
        fwd = WPolyMap(tuple(c - o for c, o in zip(centred.components, off)), phi.target_weights)
        inv = invert_map(fwd) if inverse is None else _centre_inverse(inverse, a, off)
        return cls(a, tuple(_linalg.identity(n)), fwd, inv, off)

    @property
    def n(self) -> int:
        return self.forward.n_target

    @property
    def weights(self) -> tuple[int, ...]:
        return self.forward.source_weights

    @property
    def trunc(self) -> Trunc:
        return min_trunc(self.forward.trunc, self.inverse.trunc)

    def is_exact(self) -> bool:
        return self.trunc is None

    def linear_inverse(self) -> list[list[Fraction]]:
        return _linalg.mat_inv([list(r) for r in self.linear])

    def apply(self, x: Sequence) -> tuple:
        u = [Fraction(v) - b if not isinstance(v, float) else v - float(b) for v, b in zip(x, self.basepoint)]
        v = _linalg.mat_vec(self.linear, u)
        return tuple(o + y for o, y in zip(self.offset, self.forward(v)))

    __call__ = apply

    def apply_inverse(self, y: Sequence) -> tuple:
        z = [v - o for v, o in zip(y, self.offset)]
        v = self.inverse(z)
        u = _linalg.mat_vec(self.linear_inverse(), v)
        return tuple(b + c for b, c in zip(self.basepoint, u))

    def global_forward(self) -> WPolyMap:
        """The change as one exact polynomial map in the original coordinates."""
        if not self.forward.is_exact():
            raise TruncationError("a truncated change has no global form")
        ws = self.weights
        u = [WPoly.var(i, ws) - b for i, b in enumerate(self.basepoint)]
        v = [sum((u[j] * self.linear[k][j] for j in range(self.n)), WPoly.zero(ws)) for k in range(self.n)]
        comps = compose_polys(self.forward.components, v, None)
        return WPolyMap(tuple(c + o for c, o in zip(comps, self.offset)), self.forward.target_weights)

    def global_inverse(self) -> WPolyMap:
        if not self.inverse.is_exact():
            raise TruncationError("a truncated change has no global form")
        ws = self.weights
        z = [WPoly.var(i, ws) - o for i, o in enumerate(self.offset)]
        v = compose_polys(self.inverse.components, z, None)
        linv = self.linear_inverse()
        comps = [sum((v[j] * linv[k][j] for j in range(self.n)), WPoly.zero(ws)) + b
                 for k, b in enumerate(self.basepoint)]
        return WPolyMap(tuple(comps), ws)

    def then(self, other: "CoordinateChange") -> "CoordinateChange":
        """``other o self``; ``other`` must be centred at this change's image of the basepoint."""
        if tuple(other.basepoint) != tuple(self.offset):
            raise ValueError("second change must be centred at the image of the first basepoint")
        lin = [list(r) for r in other.linear]
        ws = self.weights
        lin_map = WPolyMap.linear(lin, ws)
        lin_inv = WPolyMap.linear(other.linear_inverse(), ws)
        fwd = compose(other.forward, compose(lin_map, self.forward))
        inv = compose(self.inverse, compose(lin_inv, other.inverse))
        return CoordinateChange(self.basepoint, self.linear, fwd, inv, other.offset)


def _centre_inverse(inverse: WPolyMap, a, off) -> WPolyMap:
    ws = inverse.source_weights
    shifted = [translate_poly(c, off) for c in inverse.components]
    return WPolyMap(tuple(c - b for c, b in zip(shifted, a)), inverse.target_weights)


def linearly_adapt(frame: HFrame, a: Sequence | None = None) -> CoordinateChange:
    """The affine change ``x -> M(a)^{-1}(x - a)`` after which ``X_j(0) = d_j``."""
    a = frame.basepoint if a is None else as_point(a, frame.n)
    m = frame.matrix_at(a)
    try:
        minv = _linalg.mat_inv(m)
    except _linalg.SingularMatrixError as exc:
        raise SingularFrameError(f"frame matrix is singular at {tuple(str(v) for v in a)}") from exc
    return CoordinateChange.affine(minv, a, frame.weights.w)


def _linear_push(frame: HFrame, a, lin, lin_inv) -> list[list[WPoly]]:
    """Coefficients of the frame in ``v = A (x - a)``: ``A X(a + A^{-1} v)``."""
    ws = frame.weights.w
    n = frame.n
    centred = frame.recentred(a)
    identity = all(lin[i][j] == int(i == j) for i in range(n) for j in range(n))
    images = [sum((WPoly.var(j, ws) * lin_inv[l][j] for j in range(n)), WPoly.zero(ws)) for l in range(n)]
    out = []
    for f in centred.fields:
        if identity:
            out.append(list(f.coeffs))
            continue
        vals = compose_polys(f.coeffs, images)
        out.append([sum((vals[l] * lin[k][l] for l in range(n)), WPoly.zero(ws, vals[0].trunc))
                    for k in range(n)])
    return out


def pushforward_frame(frame: HFrame, change: CoordinateChange, trunc: Trunc = None) -> HFrame:
    """The frame in the coordinates ``y`` of ``change``, centred so the basepoint sits at ``y = offset``.

    With ``Psi = change.inverse`` the new coefficients are ``DPsi(y)^{-1} X(Psi(y))``,
    which avoids substituting into a truncated forward map.
    """
    if frame.n != change.n:
        raise ValueError("frame and coordinate change have different dimensions")
    ws = frame.weights.w
    n = frame.n
    lin = [list(r) for r in change.linear]
    coeffs = _linear_push(frame, change.basepoint, lin, change.linear_inverse())
    psi = change.inverse
    if not _is_identity_map(psi):
        jac = psi.jacobian()
        if trunc is None:
            trunc = min_trunc(psi.trunc, *(c.trunc for col in coeffs for c in col))
            if trunc is None:
                trunc = 2 * frame.r
        jinv = matrix_inverse_series(jac, trunc)
        new = []
        for col in coeffs:
            vals = compose_polys(col, list(psi.components))
            new.append([sum((jinv[k][l] * vals[l] for l in range(n) if not vals[l].is_zero()),
                            WPoly.zero(ws, min_trunc(*(p.trunc for p in jinv[k])))) for k in range(n)])
        coeffs = new
    fields = tuple(WPolyVectorField(tuple(col)) for col in coeffs)
    if any(v != 0 for v in change.offset):
        fields = tuple(f.translate([-v for v in change.offset]) for f in fields)
    return HFrame(frame.weights, fields, change.offset)


def _is_identity_map(m: WPolyMap) -> bool:
    ws = m.source_weights
    return m.is_exact() and all(c == WPoly.var(k, ws) for k, c in enumerate(m.components))


def _centred(frame: HFrame) -> HFrame:
    return frame.recentred(frame.basepoint)


def is_privileged(frame: HFrame) -> Report:
    """Every ``X_j`` has weight ``-w_j`` at the basepoint; the report is truthy when it passes."""
    rep = Report("privileged coordinates")
    f = _centred(frame)
    w = f.weights.w
    n = f.n
    m0 = f.matrix_at((0,) * n)
    if m0 != _linalg.identity(n):
        cols = [j + 1 for j in range(n) if [m0[l][j] for l in range(n)] != [int(l == j) for l in range(n)]]
        rep.add("not-linearly-adapted", f"X_j(0) != d_j for j in {cols}")
        return rep
    for j, x in enumerate(f.fields):
        for d, comp in vf_components(x).items():
            if d < -w[j]:
                l = next(l for l, a in enumerate(comp.coeffs) if not a.is_zero())
                rep.add("not-privileged",
                        f"X_{j + 1} has a component of degree {d} < -{w[j]} along d_{l + 1}")
                break
    return rep


def model_vector_fields(frame: HFrame) -> tuple[WPolyVectorField, ...]:
    """Degree ``-w_j`` parts of the frame fields in privileged coordinates."""
    rep = is_privileged(frame)
    if not rep.ok:
        raise NotPrivileged(rep)
    f = _centred(frame)
    out = []
    for j, x in enumerate(f.fields):
        for l, a in enumerate(x.coeffs):
            if a.trunc is not None and a.trunc < f.weights[l] - f.weights[j]:
                raise TruncationError(f"X_{j + 1} is truncated below its model part")
        h = homogeneous_field(x, -f.weights[j])
        out.append(WPolyVectorField(tuple(WPoly(c.weights, c.terms, None, _trusted=True) for c in h.coeffs)))
    return tuple(out)


def is_carnot(frame: HFrame, algebra: GradedNilpotentAlgebra | None = None) -> Report:
    """Linearly adapted and model fields equal to the left-invariant frame of ``algebra``."""
    rep = is_privileged(frame)
    rep.title = "Carnot coordinates"
    if not rep.ok:
        return rep
    if algebra is None:
        algebra = tangent_algebra_at(frame)
    models = model_vector_fields(frame)
    target = NilpotentGroup(algebra).left_invariant_frame()
    for j, (mdl, ref) in enumerate(zip(models, target)):
        for l, (a, b) in enumerate(zip(mdl.coeffs, ref.coeffs)):
            if a != b:
                rep.add("model-mismatch",
                        f"model field of X_{j + 1} has d_{l + 1} coefficient {a} but the "
                        f"left-invariant frame has {b}")
                break
    return rep


def _flow_oversampled(fields: Sequence[WPolyVectorField], n_target: int) -> tuple[WPolyMap, WPolyMap]:
    """Flow jet and its inverse, raising the flow order until the inverse is known to ``n_target``."""
    work = n_target
    for _ in range(6):
        phi = flow_exp(fields, trunc=work)
        inv = invert_map(phi, trunc=work)
        if inv.trunc is None or inv.trunc >= n_target:
            return phi.truncate(n_target), inv.truncate(n_target)
        ws = phi.source_weights
        ratio = min(Fraction(c.min_weight(), w) for c, w in zip(inv.components, ws) if c.min_weight() is not None)
        work = max(work + 1, math.ceil((n_target + 1) / ratio) - 1)
    raise TruncationError("could not determine canonical coordinates at the requested order")


def exp_coordinates(frame: HFrame, a: Sequence | None = None, mode: str = "canonical",
                    trunc: Trunc = None) -> CoordinateChange:
    """Exponential coordinates at ``a``.

    ``canonical``: the inverse of ``x -> exp(sum x_j X_j)(a)`` (composed after the
    linear adaptation).  ``homogeneous-conversion``: for a privileged frame, the
    homogeneous change inverse to ``x -> exp(sum x_j X_j^{(a)})(0)``.
    """
    a = frame.basepoint if a is None else as_point(a, frame.n)
    ws = frame.weights.w
    r = frame.r
    if mode == "canonical":
        adapt = linearly_adapt(frame, a)
        lin = [list(row) for row in adapt.linear]
        coeffs = _linear_push(frame, a, lin, adapt.linear_inverse())
        fields = [WPolyVectorField(tuple(c)) for c in coeffs]
        target = 2 * r if trunc is None else trunc
        phi = None
        for work in (2 * r, 4 * r):
            phi = flow_polynomial(fields, work)
            if phi is not None:
                break
        if phi is not None:
            try:
                inv = invert_map(phi)
            except InversionError:
                phi = None
        if phi is None:
            phi, inv = _flow_oversampled(fields, target)
        return CoordinateChange(a, adapt.linear, inv, phi)
    if mode == "homogeneous-conversion":
        centred = frame.recentred(a)
        models = model_vector_fields(centred)
        phi = flow_polynomial(models, r)
        if phi is None:
            raise FlowError("flow of the model fields is not polynomial")
        inv = invert_map(phi)
        return CoordinateChange(a, tuple(_linalg.identity(frame.n)), inv, phi)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# eps-Carnot maps


def _multi_indices(n: int, size: int) -> list[MultiIndex]:
    """Multi-indices of total size ``size``, in lexicographic order (largest first)."""
    out = [m for m in product(range(size + 1), repeat=n) if sum(m) == size]
    return sorted(out, reverse=True)


@dataclass(frozen=True)
class EpsCarnotMap:
    """``eps_a = hat o T`` with ``T(x) = A (x - a)`` and triangular ``hat``.

    ``hat_k(z) = z_k + sum d_{k,b} z^b`` over ``<b> <= w_k``, ``|b| >= 2``.
    """

    basepoint: tuple[Fraction, ...]
    A: tuple[tuple[Fraction, ...], ...]
    hat: WPolyMap
    hat_inverse: WPolyMap
    d: Mapping[tuple[int, MultiIndex], Fraction] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.basepoint)

    @property
    def weights(self) -> tuple[int, ...]:
        return self.hat.source_weights

    @property
    def change(self) -> CoordinateChange:
        return CoordinateChange(self.basepoint, self.A, self.hat, self.hat_inverse)

    def __call__(self, x: Sequence) -> tuple:
        return self.change.apply(x)

    def inverse(self, y: Sequence) -> tuple:
        return self.change.apply_inverse(y)

    def as_map(self) -> WPolyMap:
        return self.change.global_forward()

    def inverse_map(self) -> WPolyMap:
        return self.change.global_inverse()

    def T(self) -> WPolyMap:
        ws = self.weights
        off = _linalg.mat_vec(self.A, [-v for v in self.basepoint])
        return WPolyMap.affine(self.A, off, ws)

    def with_coefficient(self, k: int, beta: MultiIndex, value) -> "EpsCarnotMap":
        """Copy with one ``d_{k,beta}`` replaced (used to probe uniqueness)."""
        d = dict(self.d)
        d[(k, tuple(beta))] = Fraction(value)
        hat = _hat_from_table(d, self.weights)
        return EpsCarnotMap(self.basepoint, self.A, hat, invert_map(hat), d)


def _hat_from_table(d: Mapping[tuple[int, MultiIndex], Fraction], ws) -> WPolyMap:
    comps = []
    for k in range(len(ws)):
        p = WPoly.var(k, ws)
        for (kk, beta), c in d.items():
            if kk == k and c != 0:
                p = p + WPoly.monomial(beta, ws, c)
        comps.append(p)
    return WPolyMap(tuple(comps), ws)


def _triangular_solve(chi: Sequence[WPoly], ws: Sequence[int], nparams: int = 0) -> dict:
    """Coefficients ``d_{k,b}`` (polynomials in the parameters) with ``[hat(chi)]_{<= w_k} = x_k``.

    ``chi`` is a jet in ``(p, x)`` whose ``x``-linear part is the identity.
    Returns ``{(k, b): WPoly in (p, x) with no x-dependence}``.
    """
    n = len(ws)
    ring = chi[0].weights
    xw = tuple(ws)

    def xdeg(m) -> int:
        return weighted_degree(m[nparams:], xw)

    def cap(p: WPoly, level: int) -> WPoly:
        return p.filter(lambda m: xdeg(m) <= level)

    powers: dict = {}

    def chi_power(beta: MultiIndex, level: int) -> WPoly:
        key = (beta, level)
        if key not in powers:
            acc = WPoly.const(1, ring, chi[0].trunc)
            for j, e in enumerate(beta):
                for _ in range(e):
                    acc = cap(acc * cap(chi[j], level), level)
            powers[key] = acc
        return powers[key]

    out: dict = {}
    for k in range(n):
        wk = ws[k]
        xk = WPoly.var(nparams + k, ring, chi[0].trunc)
        res = xk - cap(chi[k], wk)
        for size in range(1, wk + 1):
            for beta in _multi_indices(n, size):
                if weighted_degree(beta, ws) > wk:
                    continue
                coef_terms = {m[:nparams] + (0,) * n: c for m, c in res.terms.items() if m[nparams:] == beta}
                if not coef_terms:
                    continue
                if size == 1:
                    raise TriangularSolveError(
                        f"component {k + 1}: linear part is not the identity (frame not linearly adapted)")
                coef = WPoly(ring, coef_terms, res.trunc)
                out[(k, beta)] = coef
                res = res - cap(coef * chi_power(beta, wk), wk)
        leftover = res.filter(lambda m: xdeg(m) <= wk)
        if not leftover.is_zero():
            raise TriangularSolveError(f"component {k + 1}: residual {leftover} after triangular solve")
    return out


def eps_carnot(frame: HFrame, a: Sequence | None = None) -> EpsCarnotMap:
    """The eps-Carnot map at ``a``.

    Canonical coordinates of the first kind at ``a`` are Carnot; any other
    Carnot chart differs from them by ``id + O(order >= 1)``.  So ``hat`` is
    fixed by requiring ``[hat(chi(x))]_k`` to equal ``x_k`` up to weight ``w_k``,
    where ``chi`` is the linearly adapted exponential map.  The triangular
    shape makes the solution unique.
    """
    a = frame.basepoint if a is None else as_point(a, frame.n)
    ws = frame.weights.w
    r = frame.r
    adapt = linearly_adapt(frame, a)
    lin = [list(row) for row in adapt.linear]
    coeffs = _linear_push(frame, a, lin, adapt.linear_inverse())
    chi = flow_jet([list(c) for c in coeffs], 0, ws, r, x_cap=r)
    table = _triangular_solve(chi, ws)
    d = {key: p.constant_term() for key, p in table.items() if p.constant_term() != 0}
    hat = _hat_from_table(d, ws)
    return EpsCarnotMap(a, adapt.linear, hat, invert_map(hat), d)


def eps_pair(frame: HFrame, x: Sequence, y: Sequence) -> tuple:
    """``eps_x(y)``, the two-point field assembled pointwise."""
    return eps_carnot(frame, x)(y)


# ---------------------------------------------------------------------------
# families of eps-Carnot maps with the basepoint as a parameter


@dataclass(frozen=True)
class EpsFamily:
    """Jets of ``(s, x) -> eps_s(x)`` and ``(s, z) -> eps_s^{-1}(z)`` around basepoint ``0``.

    Both live in ``2n`` variables ``(s, x)`` with the weights of ``x`` on both blocks.
    """

    weights: tuple[int, ...]
    forward: WPolyMap
    inverse: WPolyMap
    trunc: int


def eps_family(frame: HFrame, trunc: int | None = None) -> EpsFamily:
    """Eps-Carnot maps at every basepoint ``s`` near the origin, jointly as jets in ``(s, x)``.

    The frame must be privileged at its centre so that the basepoint variables
    carry the same weights as the coordinates.
    """
    f = _centred(frame)
    rep = is_privileged(f)
    if not rep.ok:
        raise NotPrivileged(rep)
    N = 2 * f.r if trunc is None else trunc
    return _eps_jets(f, N, f.weights.w + f.weights.w)


def eps_family_at(frame: HFrame, a: Sequence | None = None, trunc: int | None = None) -> EpsFamily:
    """Like :func:`eps_family` but about any point ``a`` of an exact frame, in coordinates ``x - a``.

    No privilege is assumed, so the jets are truncated in plain Taylor order:
    every variable of the ring ``(s, x)`` carries weight 1.  Any centred map
    can then be substituted soundly, and retagging with the true weights keeps
    the same truncation order since weighted degree dominates total degree.
    """
    a = frame.basepoint if a is None else as_point(a, frame.n)
    f = frame.recentred(a)
    N = 2 * f.r if trunc is None else trunc
    return _eps_jets(f, N, (1,) * (2 * f.n))


def _eps_jets(f: HFrame, N: int, ring: Sequence[int]) -> EpsFamily:
    ws = f.weights.w
    n = f.n
    r = f.r
    ring = tuple(ring)
    s_vars = [WPoly.var(i, ring, N) for i in range(n)]
    x_vars = [WPoly.var(n + i, ring, N) for i in range(n)]
    shift_images = [WPoly.var(i, ring) + WPoly.var(n + i, ring) for i in range(n)]
    s_only = [WPoly.var(i, ring) for i in range(n)]

    fcoeffs = [[compose_polys([a], shift_images, "auto")[0].truncate(N) for a in fld.coeffs] for fld in f.fields]
    mat = [[compose_polys([f.fields[j].coeffs[l]], s_only, "auto")[0].truncate(N) for j in range(n)]
           for l in range(n)]
    amat = matrix_inverse_series(mat, N)

    u = flow_jet(fcoeffs, n, ws, N, x_cap=r)
    chi = [sum((amat[k][l] * u[l] for l in range(n)), WPoly.zero(ring, N)) for k in range(n)]
    table = _triangular_solve(chi, ws, nparams=n)

    # hat in (s, z), with z in the second block
    hat = []
    for k in range(n):
        p = x_vars[k]
        for (kk, beta), coef in table.items():
            if kk == k:
                p = p + coef * WPoly.monomial((0,) * n + beta, ring, 1, N)
        hat.append(p)
    tz = [sum((amat[k][l] * (x_vars[l] - s_vars[l]) for l in range(n)), WPoly.zero(ring, N)) for k in range(n)]
    fwd = compose_polys(hat, s_vars + tz)
    hat_map = WPolyMap(tuple(hat), ws)
    hat_inv = invert_map(hat_map, trunc=N, nparams=n)
    inv = [s_vars[k] + sum((mat[k][l] * hat_inv.components[l] for l in range(n)), WPoly.zero(ring, N))
           for k in range(n)]
    fwd_map = WPolyMap(tuple(fwd), ws)
    inv_map = WPolyMap(tuple(inv), ws)
    eff = min_trunc(fwd_map.trunc, inv_map.trunc)
    return EpsFamily(ws, fwd_map.truncate(eff), inv_map.truncate(eff), eff)


def swap_blocks(theta: WPolyMap, n: int) -> WPolyMap:
    """Reorder variables ``(a, b) -> (b, a)`` for two blocks of size ``n``."""
    ws = theta.source_weights
    new_ws = ws[n:] + ws[:n]
    comps = []
    for c in theta.components:
        terms = {m[n:] + m[:n]: v for m, v in c.terms.items()}
        comps.append(WPoly(new_ws, terms, c.trunc, _trusted=True))
    return WPolyMap(tuple(comps), theta.target_weights)


@dataclass(frozen=True)
class OsculationResult:
    """``R(x, y) = eps_y(x) - (-y).x`` and ``R'(x, y) = eps_y^{-1}(x) - y.x``.

    ``order`` is ``None`` when the residual vanishes up to the truncation order.
    """

    residual: WPolyMap
    order: int | None
    inverse_residual: WPolyMap
    inverse_order: int | None
    report: Report

    @property
    def ok(self) -> bool:
        return self.report.ok


def _order_or_none(theta: WPolyMap) -> int | None:
    try:
        return weighted_order(theta)
    except TruncationError:
        return None


def osculation_residual(frame: HFrame, group: NilpotentGroup | None = None,
                        trunc: int | None = None) -> OsculationResult:
    """Compare the eps-Carnot family with the group law of the tangent group at the centre.

    The frame must already be in Carnot coordinates at its centre.
    """
    f = _centred(frame)
    rep = is_carnot(f)
    if not rep.ok:
        rep.title = "osculation"
        return OsculationResult(WPolyMap.identity(f.weights.w), None, WPolyMap.identity(f.weights.w), None, rep)
    n = f.n
    if group is None:
        group = NilpotentGroup(tangent_algebra_at(f))
    fam = eps_family(f, trunc)
    ring = fam.forward.source_weights
    s_vars = [WPoly.var(i, ring) for i in range(n)]
    x_vars = [WPoly.var(n + i, ring) for i in range(n)]
    minus_s_x = compose_polys(group.law.components, [-v for v in s_vars] + x_vars, None)
    s_x = compose_polys(group.law.components, s_vars + x_vars, None)
    res = WPolyMap(tuple(a - b.truncate(fam.trunc) for a, b in zip(fam.forward.components, minus_s_x)),
                   f.weights.w)
    res_inv = WPolyMap(tuple(a - b.truncate(fam.trunc) for a, b in zip(fam.inverse.components, s_x)),
                       f.weights.w)
    res = swap_blocks(res, n)
    res_inv = swap_blocks(res_inv, n)
    order = _order_or_none(res)
    inv_order = _order_or_none(res_inv)
    out = Report("osculation")
    if order is not None and order < 1:
        out.add("osculation-order", f"eps_y(x) - (-y).x has weighted order {order} < 1")
    if inv_order is not None and inv_order < 1:
        out.add("osculation-order", f"eps_y^-1(x) - y.x has weighted order {inv_order} < 1")
    return OsculationResult(res, order, res_inv, inv_order, out)
