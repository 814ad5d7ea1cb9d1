"""Carnot structures on a coordinate patch, given by an H-frame of polynomial vector fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import _linalg
from .nilgroup import GradedNilpotentAlgebra, InvalidAlgebra, NilpotentGroup, validate_algebra
from .report import Report
from .weights import WeightSequence, as_point
from .wpoly import (
    Trunc,
    TruncationError,
    WPoly,
    WPolyVectorField,
    lie_bracket,
    matrix_inverse_series,
)


class SingularFrameError(ValueError):
    pass


class NotCarnotFiltration(ValueError):
    pass


@dataclass(frozen=True)
class HFrame:
    """Vector fields ``X_1..X_n`` with weights ``w``; ``H_w = span{X_j : w_j <= w}``.

    Exact frames live on all of ``R^n``.  A frame with truncated coefficients is
    a jet centred at the origin of its coordinates, so its basepoint must be 0.
    """

    weights: WeightSequence
    fields: tuple[WPolyVectorField, ...]
    basepoint: tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        ws = self.weights if isinstance(self.weights, WeightSequence) else WeightSequence(tuple(self.weights))
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "fields", tuple(self.fields))
        n = ws.n
        if len(self.fields) != n:
            raise ValueError(f"frame has {len(self.fields)} fields for {n} weights")
        for f in self.fields:
            if f.n != n:
                raise ValueError("every field needs one coefficient per coordinate")
        bp = self.basepoint or tuple(Fraction(0) for _ in range(n))
        object.__setattr__(self, "basepoint", as_point(bp, n))
        if not self.is_exact() and any(v != 0 for v in self.basepoint):
            raise TruncationError("a truncated frame is a jet at the origin; basepoint must be 0")

    @classmethod
    def from_group(cls, group: NilpotentGroup, basepoint: Sequence | None = None) -> "HFrame":
        return cls(group.weights, group.left_invariant_frame(), tuple(basepoint or ()))

    @classmethod
    def coordinate(cls, weights: WeightSequence | Sequence[int]) -> "HFrame":
        ws = weights if isinstance(weights, WeightSequence) else WeightSequence(tuple(weights))
        return cls(ws, tuple(WPolyVectorField.coordinate(j, ws.w) for j in range(ws.n)))

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def r(self) -> int:
        return self.weights.r

    @property
    def trunc(self) -> Trunc:
        vals = [f.trunc for f in self.fields if f.trunc is not None]
        return min(vals) if vals else None

    def is_exact(self) -> bool:
        return all(f.trunc is None for f in self.fields)

    def matrix_polys(self) -> list[list[WPoly]]:
        """``M[l][j]`` is the ``d_l`` coefficient of ``X_j``."""
        return [[self.fields[j].coeffs[l] for j in range(self.n)] for l in range(self.n)]

    def matrix_at(self, point: Sequence) -> list[list]:
        self._check_point(point)
        return [[self.fields[j].coeffs[l].evaluate(tuple(point)) for j in range(self.n)] for l in range(self.n)]

    def _check_point(self, point: Sequence) -> None:
        if len(point) != self.n:
            raise ValueError(f"point must have {self.n} coordinates")
        if not self.is_exact() and any(v != 0 for v in point):
            raise TruncationError("truncated frame can only be evaluated at its centre")

    def recentred(self, a: Sequence) -> "HFrame":
        """The same frame in coordinates ``u = x - a`` (basepoint moves to ``0``)."""
        a = as_point(a, self.n)
        if all(v == 0 for v in a):
            return HFrame(self.weights, self.fields, tuple(Fraction(0) for _ in a))
        if not self.is_exact():
            raise TruncationError("cannot recentre a truncated frame")
        return HFrame(self.weights, tuple(f.translate(a) for f in self.fields))

    def with_basepoint(self, a: Sequence) -> "HFrame":
        return HFrame(self.weights, self.fields, tuple(a))

    def truncate(self, trunc: Trunc) -> "HFrame":
        return HFrame(self.weights, tuple(f.truncate(trunc) for f in self.fields), self.basepoint)


@dataclass(frozen=True)
class FrameBracketCoefficients:
    """``[X_i, X_j] = sum_k L_ij^k(x) X_k`` for ``i < j``; polynomials in ``u = x - centre``."""

    coefficients: Mapping[tuple[int, int, int], WPoly]
    centre: tuple[Fraction, ...]
    weights: WeightSequence
    residual: Report = field(default_factory=lambda: Report("bracket residual"))

    def L(self, i: int, j: int, k: int) -> WPoly:
        if i == j:
            return WPoly.zero(self.weights.w)
        if i < j:
            return self.coefficients[(i, j, k)]
        return -self.coefficients[(j, i, k)]

    def at(self, point: Sequence) -> dict[tuple[int, int, int], Fraction]:
        u = tuple(Fraction(p) - c for p, c in zip(point, self.centre))
        return {key: p.evaluate(u) for key, p in self.coefficients.items()}


def bracket_coefficients(frame: HFrame, trunc: Trunc = None) -> FrameBracketCoefficients:
    """Solve ``[X_i, X_j] = sum_k L_ij^k X_k`` by series inversion of the frame matrix."""
    if trunc is None:
        trunc = 2 * frame.r
    centred = frame.recentred(frame.basepoint)
    mat = centred.matrix_polys()
    try:
        inv = matrix_inverse_series(mat, trunc)
    except _linalg.SingularMatrixError as exc:
        raise SingularFrameError(f"frame matrix is singular at {tuple(str(v) for v in frame.basepoint)}") from exc
    w = frame.weights.w
    n = frame.n
    out: dict[tuple[int, int, int], WPoly] = {}
    rep = Report("bracket residual")
    for i in range(n):
        for j in range(i + 1, n):
            b = lie_bracket(centred.fields[i], centred.fields[j]).coeffs
            for k in range(n):
                acc = WPoly.zero(w)
                for l in range(n):
                    if not b[l].is_zero() and not inv[k][l].is_zero():
                        acc = acc + inv[k][l] * b[l]
                out[(i, j, k)] = acc
                if w[k] > w[i] + w[j] and not acc.is_zero():
                    mon, c = acc.sorted_terms()[0]
                    rep.add("not-carnot-filtration",
                            f"[X_{i + 1}, X_{j + 1}] has component L_{i + 1}{j + 1}^{k + 1} = {c} * x^{mon} "
                            f"(+...) along X_{k + 1} of weight {w[k]} > {w[i]} + {w[j]}")
    return FrameBracketCoefficients(out, frame.basepoint, frame.weights, rep)


def _point_constants(frame: HFrame, a: Sequence) -> dict[tuple[int, int, int], Fraction]:
    a = as_point(a, frame.n)
    frame._check_point(a)
    m = frame.matrix_at(a)
    try:
        minv = _linalg.mat_inv(m)
    except _linalg.SingularMatrixError as exc:
        raise SingularFrameError(f"frame matrix is singular at {tuple(str(v) for v in a)}") from exc
    n = frame.n
    vals = {}
    for i in range(n):
        for j in range(i + 1, n):
            b = lie_bracket(frame.fields[i], frame.fields[j])
            if b.trunc is not None and b.trunc < 0:
                raise TruncationError("frame jet too short to evaluate brackets")
            bv = b.at(a)
            lv = _linalg.mat_vec(minv, bv)
            for k in range(n):
                if lv[k] != 0:
                    vals[(i, j, k)] = lv[k]
    return vals


def tangent_algebra_at(frame: HFrame, a: Sequence | None = None) -> GradedNilpotentAlgebra:
    """Structure constants ``L_ij^k(a)`` kept on ``w_i + w_j = w_k``."""
    a = frame.basepoint if a is None else a
    w = frame.weights
    vals = _point_constants(frame, a)
    bad = [(i, j, k) for (i, j, k) in vals if w[k] > w[i] + w[j]]
    if bad:
        i, j, k = bad[0]
        raise NotCarnotFiltration(f"[X_{i + 1}, X_{j + 1}] has a component along X_{k + 1} at the point")
    top = {key: c for key, c in vals.items() if w[key[0]] + w[key[1]] == w[key[2]]}
    return GradedNilpotentAlgebra.from_constants(w, top)


def validate_filtration(frame: HFrame, trunc: Trunc = None) -> Report:
    rep = Report("Carnot filtration")
    try:
        m = frame.matrix_at(frame.basepoint)
        _linalg.mat_inv(m)
    except _linalg.SingularMatrixError:
        rep.add("singular-frame", "frame matrix is not invertible at the basepoint")
        return rep
    try:
        coeffs = bracket_coefficients(frame, trunc)
    except TruncationError as exc:
        rep.add("truncation", str(exc))
        return rep
    rep.extend(coeffs.residual)
    if rep.ok:
        try:
            alg = tangent_algebra_at(frame, frame.basepoint)
        except (InvalidAlgebra, NotCarnotFiltration) as exc:
            rep.add("tangent-algebra", str(exc))
        else:
            rep.extend(validate_algebra(alg.constants, alg.weights))
    return rep
