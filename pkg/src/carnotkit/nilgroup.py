"""Graded nilpotent Lie algebras and the groups they generate in exponential coordinates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from . import _linalg
from .report import Report
from .weights import WeightSequence, as_point, dilate
from .wpoly import WPoly, WPolyMap, WPolyVectorField, compose_polys

Key = tuple[int, int, int]


class InvalidAlgebra(ValueError):
    def __init__(self, report: Report):
        super().__init__(str(report))
        self.report = report


def _label(i: int, j: int, k: int) -> str:
    return f"L_{i + 1}{j + 1}^{k + 1}"


def _complete(constants: Mapping[Key, object]) -> dict[Key, Fraction]:
    """Full antisymmetric table; explicit (j,i,k) entries take precedence over negation."""
    full: dict[Key, Fraction] = {}
    for (i, j, k), c in constants.items():
        c = Fraction(c)
        if c == 0:
            continue
        full[(i, j, k)] = c
    for (i, j, k), c in list(full.items()):
        if (j, i, k) not in full and i != j:
            full[(j, i, k)] = -c
    return full


def _bracket_table(full: Mapping[Key, Fraction], n: int):
    table: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    for (i, j, k), c in full.items():
        table.setdefault((i, j), []).append((k, c))
    return table


def validate_algebra(constants: Mapping[Key, object], w: WeightSequence | Sequence[int]) -> Report:
    """Check antisymmetry, grading support and the Jacobi identity (0-based keys)."""
    ws = w if isinstance(w, WeightSequence) else WeightSequence(tuple(w))
    n = ws.n
    rep = Report("graded nilpotent Lie algebra")
    for (i, j, k), c in sorted(constants.items()):
        if not all(0 <= v < n for v in (i, j, k)):
            rep.add("index", f"{(i + 1, j + 1, k + 1)} outside 1..{n}")
    if not rep.ok:
        return rep
    for (i, j, k), c in sorted(constants.items()):
        c = Fraction(c)
        if c == 0:
            continue
        if i == j:
            rep.add("antisymmetry", f"{_label(i, j, k)} = {c} but [e_{i + 1}, e_{i + 1}] must vanish")
        elif (j, i, k) in constants and i < j and Fraction(constants[(j, i, k)]) != -c:
            rep.add("antisymmetry",
                    f"{_label(i, j, k)} = {c} and {_label(j, i, k)} = {Fraction(constants[(j, i, k)])}")
        if ws[i] + ws[j] != ws[k]:
            rep.add("grading", f"{_label(i, j, k)} = {c} with w_{i + 1} + w_{j + 1} = {ws[i] + ws[j]} != w_{k + 1} = {ws[k]}")
    if not rep.ok:
        return rep
    full = _complete(constants)
    table = _bracket_table(full, n)

    def br(u: dict[int, Fraction], v: dict[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for a, ca in u.items():
            for b, cb in v.items():
                for k, c in table.get((a, b), ()):
                    out[k] = out.get(k, Fraction(0)) + ca * cb * c
        return {k: c for k, c in out.items() if c != 0}

    for a, b, c in itertools.combinations(range(n), 3):
        ea, eb, ec = {a: Fraction(1)}, {b: Fraction(1)}, {c: Fraction(1)}
        total: dict[int, Fraction] = {}
        for term in (br(ea, br(eb, ec)), br(eb, br(ec, ea)), br(ec, br(ea, eb))):
            for k, v in term.items():
                total[k] = total.get(k, Fraction(0)) + v
        bad = {k: v for k, v in total.items() if v != 0}
        if bad:
            rep.add("jacobi", f"Jacobi fails on (e_{a + 1}, e_{b + 1}, e_{c + 1}): residual "
                    + ", ".join(f"{v} e_{k + 1}" for k, v in sorted(bad.items())))
    return rep


@dataclass(frozen=True)
class GradedNilpotentAlgebra:
    """Structure constants ``L_ij^k`` (0-based, stored for ``i < j``) supported on ``w_i + w_j = w_k``."""

    weights: WeightSequence
    constants: Mapping[Key, Fraction]
    _table: dict = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        clean = {}
        for (i, j, k), c in self.constants.items():
            c = Fraction(c)
            if c == 0:
                continue
            if i < j:
                clean[(i, j, k)] = c
            elif i > j:
                clean[(j, i, k)] = -c if (j, i, k) not in self.constants else Fraction(self.constants[(j, i, k)])
        object.__setattr__(self, "constants", dict(sorted(clean.items())))
        object.__setattr__(self, "_table", _bracket_table(_complete(self.constants), self.n))

    @classmethod
    def from_constants(cls, w: WeightSequence | Sequence[int], constants: Mapping[Key, object]) -> "GradedNilpotentAlgebra":
        ws = w if isinstance(w, WeightSequence) else WeightSequence(tuple(w))
        rep = validate_algebra(constants, ws)
        if not rep.ok:
            raise InvalidAlgebra(rep)
        return cls(ws, {key: Fraction(c) for key, c in constants.items()})

    @classmethod
    def abelian(cls, w: WeightSequence | Sequence[int]) -> "GradedNilpotentAlgebra":
        ws = w if isinstance(w, WeightSequence) else WeightSequence(tuple(w))
        return cls(ws, {})

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def r(self) -> int:
        return self.weights.r

    def L(self, i: int, j: int, k: int) -> Fraction:
        if i == j:
            return Fraction(0)
        if i < j:
            return self.constants.get((i, j, k), Fraction(0))
        return -self.constants.get((j, i, k), Fraction(0))

    def is_abelian(self) -> bool:
        return not self.constants

    def bracket(self, u: Sequence, v: Sequence) -> list:
        """``[u, v]`` for coordinate vectors over any ring (rationals, floats or polynomials)."""
        out: list = [None] * self.n
        for (i, j), entries in self._table.items():
            ui, vj = u[i], v[j]
            if _is_zero(ui) or _is_zero(vj):
                continue
            prod = ui * vj
            for k, c in entries:
                term = prod * c
                out[k] = term if out[k] is None else out[k] + term
        zero = _zero_like(u[0] if len(u) else 0)
        return [zero if o is None else o for o in out]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedNilpotentAlgebra):
            return NotImplemented
        return self.weights == other.weights and dict(self.constants) == dict(other.constants)

    __hash__ = None  # type: ignore[assignment]


def _is_zero(v) -> bool:
    if isinstance(v, WPoly):
        return v.is_zero()
    return v == 0


def _zero_like(v):
    if isinstance(v, WPoly):
        return WPoly.zero(v.weights, v.trunc)
    if isinstance(v, float):
        return 0.0
    return Fraction(0)


def adjoint_matrix(algebra: GradedNilpotentAlgebra, x: Sequence) -> list[list]:
    """Matrix of ``ad_xi``: ``A(x)_{kj} = sum_i L_ij^k x_i``."""
    n = algebra.n
    zero = _zero_like(x[0] if n else 0)
    a = [[zero for _ in range(n)] for _ in range(n)]
    for (i, j), entries in algebra._table.items():
        xi = x[i]
        if _is_zero(xi):
            continue
        for k, c in entries:
            a[k][j] = a[k][j] + xi * c
    return a


def _dynkin_words(r: int) -> Iterator[tuple[Fraction, tuple[tuple[int, int], ...]]]:
    """Coefficients and exponent pairs ``((r_1,s_1),...,(r_m,s_m))`` of the Dynkin series.

    Only words of total length ``<= r`` survive in step ``r``.  A word whose
    innermost slot would bracket an element with itself is dropped.
    """
    for total in range(1, r + 1):
        for m in range(1, total + 1):
            for pairs in _pair_sequences(m, total):
                rm, sm = pairs[-1]
                if sm >= 2 or (sm == 0 and rm != 1):
                    continue
                denom = total
                for ri, si in pairs:
                    denom *= math.factorial(ri) * math.factorial(si)
                coeff = Fraction((-1) ** (m - 1), m) / denom
                yield coeff, pairs


def _pair_sequences(m: int, total: int):
    if m == 0:
        if total == 0:
            yield ()
        return
    for ri in range(total + 1):
        for si in range(total - ri + 1):
            if ri + si == 0:
                continue
            for rest in _pair_sequences(m - 1, total - ri - si):
                yield ((ri, si),) + rest


def dynkin_series(algebra: GradedNilpotentAlgebra, xi: Sequence, eta: Sequence) -> list:
    """``log(exp(xi) exp(eta))`` via the matrix form of the Dynkin series (finite by nilpotency)."""
    n = algebra.n
    ax = adjoint_matrix(algebra, xi)
    ay = adjoint_matrix(algebra, eta)
    out = [xi[k] + eta[k] for k in range(n)]
    for coeff, pairs in _dynkin_words(algebra.r):
        if len(pairs) == 1 and pairs[0] in ((1, 0), (0, 1)):
            continue  # the linear terms xi + eta
        rm, sm = pairs[-1]
        if sm == 1:
            vec = list(eta)
            vec = _apply_power(ax, vec, rm)
        else:
            vec = list(xi)
        for ri, si in reversed(pairs[:-1]):
            vec = _apply_power(ay, vec, si)
            vec = _apply_power(ax, vec, ri)
        if all(_is_zero(v) for v in vec):
            continue
        out = [o + v * coeff for o, v in zip(out, vec)]
    return out


def _apply_power(mat, vec, power: int):
    for _ in range(power):
        vec = _linalg.mat_vec(mat, vec)
    return vec


class NilpotentGroup:
    """The simply connected group of a graded nilpotent algebra, in exponential coordinates."""

    def __init__(self, algebra: GradedNilpotentAlgebra):
        self.algebra = algebra
        w = algebra.weights.w
        n = len(w)
        ws2 = w + w
        xs = [WPoly.var(i, ws2) for i in range(n)]
        ys = [WPoly.var(n + i, ws2) for i in range(n)]
        self.law = WPolyMap(tuple(dynkin_series(algebra, xs, ys)), w)
        self._frame: tuple[WPolyVectorField, ...] | None = None

    @classmethod
    def from_constants(cls, w, constants) -> "NilpotentGroup":
        return cls(GradedNilpotentAlgebra.from_constants(w, constants))

    @property
    def weights(self) -> WeightSequence:
        return self.algebra.weights

    @property
    def n(self) -> int:
        return self.algebra.n

    def mul(self, x: Sequence, y: Sequence) -> tuple:
        if len(x) != self.n or len(y) != self.n:
            raise ValueError(f"points must have {self.n} coordinates")
        return self.law(tuple(x) + tuple(y))

    def inv(self, x: Sequence) -> tuple:
        return tuple(-v for v in x)

    def identity(self) -> tuple:
        return tuple(Fraction(0) for _ in range(self.n))

    def dilate(self, t, x: Sequence) -> tuple:
        return dilate(t, x, self.weights)

    def left_invariant_frame(self) -> tuple[WPolyVectorField, ...]:
        if self._frame is None:
            n = self.n
            w = self.weights.w
            fields = []
            for j in range(n):
                target = tuple(int(i == j) for i in range(n))
                coeffs = []
                for comp in self.law.components:
                    terms = {m[:n]: c for m, c in comp.terms.items() if m[n:] == target}
                    coeffs.append(WPoly(w, terms))
                fields.append(WPolyVectorField(tuple(coeffs)))
            self._frame = tuple(fields)
        return self._frame

    def left_translation_jet(self, a: Sequence) -> WPolyMap:
        a = as_point(a, self.n) if not any(isinstance(v, float) for v in a) else tuple(a)
        w = self.weights.w
        images = [WPoly.const(v, w) for v in a] + [WPoly.var(i, w) for i in range(self.n)]
        return WPolyMap(tuple(compose_polys(self.law.components, images, None)), w)


def dynkin_product(group: NilpotentGroup, x: Sequence, y: Sequence) -> tuple:
    return group.mul(x, y)


def group_inverse(x: Sequence) -> tuple:
    return tuple(-v for v in x)


def left_invariant_frame(group: NilpotentGroup) -> tuple[WPolyVectorField, ...]:
    return group.left_invariant_frame()


def left_translation_jet(group: NilpotentGroup, a: Sequence) -> WPolyMap:
    return group.left_translation_jet(a)


def heisenberg_algebra() -> GradedNilpotentAlgebra:
    return GradedNilpotentAlgebra.from_constants((1, 1, 2), {(0, 1, 2): 1})


def engel_algebra() -> GradedNilpotentAlgebra:
    return GradedNilpotentAlgebra.from_constants((1, 1, 2, 3), {(0, 1, 2): 1, (0, 2, 3): 1})
