"""Sparse weighted polynomials with exact rational coefficients.

A :class:`WPoly` is either an exact polynomial (``trunc is None``) or a jet
known modulo monomials of weighted degree ``> trunc``.  Maps and vector fields
are tuples of such polynomials sharing the same variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from . import _linalg
from .weights import MultiIndex, WeightSequence, as_weights

Trunc = Optional[int]


class TruncationError(ArithmeticError):
    """A requested quantity is not determined at the available truncation order."""


class CompositionError(ValueError):
    pass


class InversionError(ValueError):
    pass


class FlowError(ArithmeticError):
    pass


class OrderViolation(ValueError):
    pass


def min_trunc(*truncs: Trunc) -> Trunc:
    vals = [t for t in truncs if t is not None]
    return min(vals) if vals else None


def _wdeg(m: MultiIndex, weights: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(m, weights))


def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class WPoly:
    """Polynomial in ``len(weights)`` variables, truncated at weighted degree ``trunc``."""

    __slots__ = ("weights", "terms", "trunc")

    def __init__(self, weights: Sequence[int], terms: Mapping[MultiIndex, object] | None = None,
                 trunc: Trunc = None, *, _trusted: bool = False):
        self.weights = as_weights(weights)
        self.trunc = trunc
        if _trusted:
            self.terms = dict(terms) if terms is not None else {}
            return
        clean: dict[MultiIndex, Fraction] = {}
        n = len(self.weights)
        for m, c in (terms or {}).items():
            m = tuple(int(e) for e in m)
            if len(m) != n:
                raise ValueError(f"monomial {m} does not have {n} exponents")
            if any(e < 0 for e in m):
                raise ValueError(f"negative exponent in {m}")
            c = _frac(c)
            if c == 0:
                continue
            if trunc is not None and _wdeg(m, self.weights) > trunc:
                continue
            clean[m] = clean.get(m, Fraction(0)) + c
            if clean[m] == 0:
                del clean[m]
        self.terms = clean

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, weights: Sequence[int], trunc: Trunc = None) -> "WPoly":
        return cls(weights, {}, trunc, _trusted=True)

    @classmethod
    def const(cls, c, weights: Sequence[int], trunc: Trunc = None) -> "WPoly":
        ws = as_weights(weights)
        c = _frac(c)
        return cls(ws, {(0,) * len(ws): c} if c != 0 else {}, trunc, _trusted=True)

    @classmethod
    def var(cls, i: int, weights: Sequence[int], trunc: Trunc = None, coeff=1) -> "WPoly":
        ws = as_weights(weights)
        m = tuple(int(k == i) for k in range(len(ws)))
        return cls(ws, {m: coeff}, trunc)

    @classmethod
    def monomial(cls, m: Sequence[int], weights: Sequence[int], coeff=1, trunc: Trunc = None) -> "WPoly":
        return cls(weights, {tuple(m): coeff}, trunc)

    # basic queries ------------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.weights)

    def is_zero(self) -> bool:
        return not self.terms

    def is_exact(self) -> bool:
        return self.trunc is None

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def wdeg(self, m: MultiIndex) -> int:
        return _wdeg(m, self.weights)

    def min_weight(self) -> Optional[int]:
        if not self.terms:
            return None
        return min(self.wdeg(m) for m in self.terms)

    def max_weight(self) -> Optional[int]:
        if not self.terms:
            return None
        return max(self.wdeg(m) for m in self.terms)

    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def sorted_terms(self) -> list[tuple[MultiIndex, Fraction]]:
        return sorted(self.terms.items())

    def coeff(self, m: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(m), Fraction(0))

    # truncation ---------------------------------------------------------
    def truncate(self, trunc: Trunc) -> "WPoly":
        new = min_trunc(self.trunc, trunc)
        if new is None:
            return WPoly(self.weights, self.terms, None, _trusted=True)
        terms = {m: c for m, c in self.terms.items() if self.wdeg(m) <= new}
        return WPoly(self.weights, terms, new, _trusted=True)

    def with_trunc(self, trunc: Trunc) -> "WPoly":
        """Declare a truncation order, dropping terms above it (never raises precision)."""
        return self.truncate(trunc)

    def filter(self, keep: Callable[[MultiIndex], bool]) -> "WPoly":
        return WPoly(self.weights, {m: c for m, c in self.terms.items() if keep(m)}, self.trunc,
                     _trusted=True)

    def homogeneous(self, degree: int) -> "WPoly":
        return self.filter(lambda m: self.wdeg(m) == degree)

    def retag(self, weights: Sequence[int], trunc: Trunc) -> "WPoly":
        """Reinterpret the same terms under other variable weights."""
        ws = as_weights(weights)
        if len(ws) != self.nvars:
            raise ValueError("retag changes the number of variables")
        terms = self.terms
        if trunc is not None:
            terms = {m: c for m, c in terms.items() if _wdeg(m, ws) <= trunc}
        return WPoly(ws, terms, trunc, _trusted=True)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "WPoly":
        if isinstance(other, WPoly):
            if other.weights != self.weights:
                raise ValueError(f"variable weights differ: {self.weights} vs {other.weights}")
            return other
        return WPoly.const(other, self.weights, None)

    def __add__(self, other) -> "WPoly":
        other = self._coerce(other)
        trunc = min_trunc(self.trunc, other.trunc)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, Fraction(0)) + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        res = WPoly(self.weights, out, None, _trusted=True)
        return res.truncate(trunc) if trunc is not None else res

    __radd__ = __add__

    def __neg__(self) -> "WPoly":
        return WPoly(self.weights, {m: -c for m, c in self.terms.items()}, self.trunc, _trusted=True)

    def __sub__(self, other) -> "WPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "WPoly":
        return self._coerce(other) - self

    def scale(self, c) -> "WPoly":
        c = _frac(c)
        if c == 0:
            return WPoly.zero(self.weights, self.trunc)
        return WPoly(self.weights, {m: v * c for m, v in self.terms.items()}, self.trunc, _trusted=True)

    def __mul__(self, other) -> "WPoly":
        if not isinstance(other, WPoly):
            return self.scale(other)
        other = self._coerce(other)
        return mul_trunc(self, other, min_trunc(self.trunc, other.trunc))

    __rmul__ = __mul__

    def __truediv__(self, c) -> "WPoly":
        return self.scale(Fraction(1) / _frac(c))

    def __pow__(self, k: int) -> "WPoly":
        if k < 0:
            raise ValueError("negative power")
        result = WPoly.const(1, self.weights, self.trunc)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, WPoly):
            if other.weights != self.weights:
                return False
            t = min_trunc(self.trunc, other.trunc)
            return self.truncate(t).terms == other.truncate(t).terms
        try:
            return (self - other).is_zero()
        except (TypeError, ValueError):
            return NotImplemented

    def __ne__(self, other) -> bool:
        res = self.__eq__(other)
        return res if res is NotImplemented else not res

    __hash__ = None  # type: ignore[assignment]

    # calculus -----------------------------------------------------------
    def deriv(self, i: int) -> "WPoly":
        out: dict[MultiIndex, Fraction] = {}
        for m, c in self.terms.items():
            e = m[i]
            if e == 0:
                continue
            nm = m[:i] + (e - 1,) + m[i + 1:]
            out[nm] = c * e
        trunc = None if self.trunc is None else self.trunc - self.weights[i]
        return WPoly(self.weights, out, trunc, _trusted=True)

    def evaluate(self, point: Sequence):
        if len(point) != self.nvars:
            raise ValueError(f"evaluation point has {len(point)} entries, expected {self.nvars}")
        total = 0
        for m, c in self.terms.items():
            term = c
            for x, e in zip(point, m):
                if e:
                    term = term * x**e
            total = total + term
        return total

    __call__ = evaluate

    def subs(self, images: Sequence["WPoly"], trunc: Trunc = "auto") -> "WPoly":  # type: ignore[assignment]
        """Substitute ``images[i]`` for variable ``i`` (see :func:`substitution_trunc`)."""
        if len(images) != self.nvars:
            raise CompositionError(f"{len(images)} images for {self.nvars} variables")
        if not images:
            raise CompositionError("cannot substitute into a polynomial without variables")
        if trunc == "auto":
            trunc = substitution_trunc(self, images)
        return _substitute(self, images, trunc, {})

    def __repr__(self) -> str:
        return f"WPoly({format_poly(self)}{'' if self.trunc is None else f' + O({self.trunc + 1})'})"


def mul_trunc(a: WPoly, b: WPoly, trunc: Trunc) -> WPoly:
    ws = a.weights
    out: dict[MultiIndex, Fraction] = {}
    if trunc is None:
        for m1, c1 in a.terms.items():
            for m2, c2 in b.terms.items():
                m = tuple(x + y for x, y in zip(m1, m2))
                v = out.get(m)
                out[m] = c1 * c2 if v is None else v + c1 * c2
    else:
        bw = [(m2, c2, _wdeg(m2, ws)) for m2, c2 in b.terms.items()]
        for m1, c1 in a.terms.items():
            d1 = _wdeg(m1, ws)
            if d1 > trunc:
                continue
            for m2, c2, d2 in bw:
                if d1 + d2 > trunc:
                    continue
                m = tuple(x + y for x, y in zip(m1, m2))
                v = out.get(m)
                out[m] = c1 * c2 if v is None else v + c1 * c2
    return WPoly(ws, {m: c for m, c in out.items() if c != 0}, trunc, _trusted=True)


def substitution_trunc(outer: WPoly | Sequence[WPoly], images: Sequence[WPoly]) -> Trunc:
    """Order up to which ``outer(images)`` is determined.

    Truncation of the inner images is always sound (no constant terms means
    weights only grow under products).  Truncation of the outer polynomial is
    sound only up to the smallest weight a dropped monomial can reach after
    substitution, which is controlled by ``min_j (minweight(image_j) / w_j)``.
    """
    outers = [outer] if isinstance(outer, WPoly) else list(outer)
    inner = min_trunc(*(im.trunc for im in images))
    outer_trunc = min_trunc(*(p.trunc for p in outers))
    if outer_trunc is None:
        return inner
    ws = outers[0].weights
    ratio = None
    for im, w in zip(images, ws):
        if im.constant_term() != 0:
            raise CompositionError("inner map has a nonzero constant term; outer truncation would be unsound")
        mw = im.min_weight()
        if mw is None:
            if im.trunc is None:
                continue
            mw = im.trunc + 1
        q = Fraction(mw, w)
        ratio = q if ratio is None or q < ratio else ratio
    if ratio is None:
        return inner
    eff = math.ceil((outer_trunc + 1) * ratio) - 1
    return min_trunc(inner, eff)


def _substitute(p: WPoly, images: Sequence[WPoly], trunc: Trunc, cache: dict) -> WPoly:
    ws_out = images[0].weights
    result: dict[MultiIndex, Fraction] = {}

    def power(j: int, e: int) -> WPoly:
        key = (j, e)
        if key not in cache:
            if e == 0:
                cache[key] = WPoly.const(1, ws_out, trunc)
            elif e == 1:
                cache[key] = images[j].truncate(trunc)
            else:
                cache[key] = mul_trunc(power(j, e - 1), images[j].truncate(trunc), trunc)
        return cache[key]

    for m, c in p.sorted_terms():
        prod: Optional[WPoly] = None
        for j, e in enumerate(m):
            if e == 0:
                continue
            pw = power(j, e)
            prod = pw if prod is None else mul_trunc(prod, pw, trunc)
            if prod.is_zero():
                break
        if prod is None:
            prod = WPoly.const(1, ws_out, trunc)
        for mm, cc in prod.terms.items():
            v = result.get(mm, Fraction(0)) + c * cc
            if v == 0:
                result.pop(mm, None)
            else:
                result[mm] = v
    return WPoly(ws_out, result, trunc, _trusted=True)


def format_poly(p: WPoly, names: Sequence[str] | None = None) -> str:
    if not p.terms:
        return "0"
    names = names or [f"x{i + 1}" for i in range(p.nvars)]
    parts = []
    for m, c in p.sorted_terms():
        mon = "*".join(f"{names[i]}^{e}" if e > 1 else names[i] for i, e in enumerate(m) if e)
        if not mon:
            parts.append(str(c))
        elif c == 1:
            parts.append(mon)
        elif c == -1:
            parts.append(f"-{mon}")
        else:
            parts.append(f"{c}*{mon}")
    return " + ".join(parts).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# maps and vector fields


@dataclass(frozen=True)
class WPolyMap:
    """Polynomial map ``R^n -> R^{n'}``; ``target_weights`` grade the output components."""

    components: tuple[WPoly, ...]
    target_weights: tuple[int, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "target_weights", as_weights(self.target_weights))
        if len(comps) != len(self.target_weights):
            raise ValueError(f"{len(comps)} components but {len(self.target_weights)} target weights")
        if comps and any(c.weights != comps[0].weights for c in comps):
            raise ValueError("components must share source variables")

    @classmethod
    def from_polys(cls, comps: Sequence[WPoly], target_weights: Sequence[int] | None = None) -> "WPolyMap":
        comps = tuple(comps)
        if target_weights is None:
            target_weights = comps[0].weights
        return cls(comps, as_weights(target_weights))

    @classmethod
    def identity(cls, weights: Sequence[int] | WeightSequence, trunc: Trunc = None) -> "WPolyMap":
        ws = as_weights(weights)
        return cls(tuple(WPoly.var(i, ws, trunc) for i in range(len(ws))), ws)

    @classmethod
    def linear(cls, matrix: Sequence[Sequence], source_weights, target_weights=None,
               trunc: Trunc = None) -> "WPolyMap":
        ws = as_weights(source_weights)
        tw = ws if target_weights is None else as_weights(target_weights)
        comps = []
        for row in matrix:
            terms = {tuple(int(k == j) for k in range(len(ws))): c for j, c in enumerate(row)}
            comps.append(WPoly(ws, terms, trunc))
        return cls(tuple(comps), tw)

    @classmethod
    def affine(cls, matrix, offset, source_weights, target_weights=None) -> "WPolyMap":
        lin = cls.linear(matrix, source_weights, target_weights)
        return cls(tuple(c + o for c, o in zip(lin.components, offset)), lin.target_weights)

    @classmethod
    def dilation(cls, t, weights) -> "WPolyMap":
        ws = as_weights(weights)
        t = _frac(t)
        return cls(tuple(WPoly.var(i, ws, None, t**w) for i, w in enumerate(ws)), ws)

    @property
    def source_weights(self) -> tuple[int, ...]:
        return self.components[0].weights if self.components else ()

    @property
    def n_source(self) -> int:
        return len(self.source_weights)

    @property
    def n_target(self) -> int:
        return len(self.components)

    @property
    def trunc(self) -> Trunc:
        return min_trunc(*(c.trunc for c in self.components))

    def is_exact(self) -> bool:
        return self.trunc is None

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, k: int) -> WPoly:
        return self.components[k]

    def __iter__(self):
        return iter(self.components)

    def __call__(self, point: Sequence) -> tuple:
        return tuple(c.evaluate(point) for c in self.components)

    evaluate = __call__

    def __eq__(self, other) -> bool:
        if not isinstance(other, WPolyMap):
            return NotImplemented
        return (self.target_weights == other.target_weights and len(self) == len(other)
                and all(a == b for a, b in zip(self.components, other.components)))

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: "WPolyMap") -> "WPolyMap":
        return WPolyMap(tuple(a + b for a, b in zip(self.components, other.components)), self.target_weights)

    def __sub__(self, other: "WPolyMap") -> "WPolyMap":
        return WPolyMap(tuple(a - b for a, b in zip(self.components, other.components)), self.target_weights)

    def __neg__(self) -> "WPolyMap":
        return WPolyMap(tuple(-a for a in self.components), self.target_weights)

    def truncate(self, trunc: Trunc) -> "WPolyMap":
        return WPolyMap(tuple(c.truncate(trunc) for c in self.components), self.target_weights)

    def retag(self, source_weights, trunc: Trunc, target_weights=None) -> "WPolyMap":
        tw = self.target_weights if target_weights is None else as_weights(target_weights)
        return WPolyMap(tuple(c.retag(source_weights, trunc) for c in self.components), tw)

    def constant(self) -> tuple[Fraction, ...]:
        return tuple(c.constant_term() for c in self.components)

    def linear_part(self) -> list[list[Fraction]]:
        n = self.n_source
        rows = []
        for c in self.components:
            rows.append([c.coeff(tuple(int(k == j) for k in range(n))) for j in range(n)])
        return rows

    def jacobian(self) -> list[list[WPoly]]:
        return [[c.deriv(j) for j in range(self.n_source)] for c in self.components]


@dataclass(frozen=True)
class WPolyVectorField:
    """``X = sum_l a_l(x) d/dx_l`` with polynomial coefficients."""

    coeffs: tuple[WPoly, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not coeffs:
            raise ValueError("vector field needs at least one coefficient")
        n = coeffs[0].nvars
        if len(coeffs) != n or any(c.weights != coeffs[0].weights for c in coeffs):
            raise ValueError("vector field must have one coefficient per variable over common weights")

    @classmethod
    def coordinate(cls, j: int, weights, trunc: Trunc = None) -> "WPolyVectorField":
        ws = as_weights(weights)
        return cls(tuple(WPoly.const(int(l == j), ws, trunc) for l in range(len(ws))))

    @classmethod
    def zero(cls, weights, trunc: Trunc = None) -> "WPolyVectorField":
        ws = as_weights(weights)
        return cls(tuple(WPoly.zero(ws, trunc) for _ in ws))

    @property
    def weights(self) -> tuple[int, ...]:
        return self.coeffs[0].weights

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def trunc(self) -> Trunc:
        return min_trunc(*(c.trunc for c in self.coeffs))

    def __getitem__(self, l: int) -> WPoly:
        return self.coeffs[l]

    def __iter__(self):
        return iter(self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WPolyVectorField):
            return NotImplemented
        return self.n == other.n and all(a == b for a, b in zip(self.coeffs, other.coeffs))

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: "WPolyVectorField") -> "WPolyVectorField":
        return WPolyVectorField(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "WPolyVectorField") -> "WPolyVectorField":
        return WPolyVectorField(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "WPolyVectorField":
        return WPolyVectorField(tuple(-a for a in self.coeffs))

    def scale(self, c) -> "WPolyVectorField":
        return WPolyVectorField(tuple(a * c for a in self.coeffs))

    def mul(self, f: WPoly) -> "WPolyVectorField":
        return WPolyVectorField(tuple(a * f for a in self.coeffs))

    def truncate(self, trunc: Trunc) -> "WPolyVectorField":
        return WPolyVectorField(tuple(a.truncate(trunc) for a in self.coeffs))

    def apply(self, f: WPoly) -> WPoly:
        """Directional derivative ``X f``."""
        total = WPoly.zero(f.weights, None)
        for l, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            total = total + a * f.deriv(l)
        return total

    def at(self, point: Sequence) -> tuple:
        return tuple(a.evaluate(point) for a in self.coeffs)

    def translate(self, shift: Sequence) -> "WPolyVectorField":
        """Coefficients re-expressed in ``u`` where ``x = shift + u``; requires exact coefficients."""
        return WPolyVectorField(tuple(translate_poly(a, shift) for a in self.coeffs))

    def __repr__(self) -> str:
        parts = [f"({format_poly(a)})d{l + 1}" for l, a in enumerate(self.coeffs) if not a.is_zero()]
        return "VF[" + " + ".join(parts or ["0"]) + "]"


def translate_poly(p: WPoly, shift: Sequence) -> WPoly:
    """``u -> p(shift + u)``; exact for exact ``p``."""
    if all(s == 0 for s in shift):
        return p
    if p.trunc is not None:
        raise TruncationError("cannot recentre a truncated jet at a different point")
    ws = p.weights
    images = [WPoly.var(i, ws) + WPoly.const(s, ws) for i, s in enumerate(shift)]
    return _substitute(p, images, None, {})


# ---------------------------------------------------------------------------
# graded structure


def hom_part(theta: WPolyMap, ell: int) -> WPolyMap:
    """Component ``k`` keeps the monomials of weighted degree ``ell + w'_k``."""
    tw = theta.target_weights
    if tw and ell < -max(tw):
        raise ValueError(f"homogeneous degree {ell} is below -{max(tw)}")
    comps = []
    for c, wk in zip(theta.components, tw):
        d = ell + wk
        if c.trunc is not None and d > c.trunc:
            raise TruncationError(f"degree {d} part requested beyond truncation order {c.trunc}")
        comps.append(c.homogeneous(d))
    return WPolyMap(tuple(comps), tw)


def hom_parts(theta: WPolyMap) -> dict[int, WPolyMap]:
    """All nonzero homogeneous parts, keyed by degree."""
    tw = theta.target_weights
    degrees = set()
    for c, wk in zip(theta.components, tw):
        for m in c.terms:
            degrees.add(c.wdeg(m) - wk)
    out = {}
    for ell in sorted(degrees):
        comps = tuple(c.homogeneous(ell + wk) for c, wk in zip(theta.components, tw))
        out[ell] = WPolyMap(comps, tw)
    return out


def weighted_order(theta: WPolyMap) -> int:
    """Least ``ell`` with a nonzero homogeneous part."""
    tw = theta.target_weights
    candidate = None
    for c, wk in zip(theta.components, tw):
        mw = c.min_weight()
        if mw is not None:
            v = mw - wk
            candidate = v if candidate is None or v < candidate else candidate
    # components known only up to their truncation bound the certainty of the answer
    bound = None
    for c, wk in zip(theta.components, tw):
        if c.trunc is not None:
            b = c.trunc + 1 - wk
            bound = b if bound is None or b < bound else bound
    if candidate is None:
        raise TruncationError("order above truncation: map vanishes modulo truncation")
    if bound is not None and candidate >= bound:
        raise TruncationError(f"order above truncation: no nonzero part below degree {bound}")
    return candidate


def order_at_least(theta: WPolyMap, m: int) -> bool:
    """True iff every homogeneous part of degree ``< m`` vanishes (checked within truncation)."""
    for c, wk in zip(theta.components, theta.target_weights):
        if c.trunc is not None and m - 1 + wk > c.trunc:
            raise TruncationError(f"checking order {m} needs degree {m - 1 + wk} > truncation {c.trunc}")
        for mon in c.terms:
            if c.wdeg(mon) - wk < m:
                return False
    return True


def vf_components(x: WPolyVectorField) -> dict[int, WPolyVectorField]:
    """Split ``X`` into homogeneous fields; ``x^a d_l`` has degree ``<a> - w_l``."""
    ws = x.weights
    buckets: dict[int, list[dict]] = {}
    for l, a in enumerate(x.coeffs):
        for m, c in a.terms.items():
            d = _wdeg(m, ws) - ws[l]
            buckets.setdefault(d, [dict() for _ in ws])[l][m] = c
    out = {}
    for d in sorted(buckets):
        out[d] = WPolyVectorField(tuple(WPoly(ws, t, x.coeffs[l].trunc, _trusted=True)
                                        for l, t in enumerate(buckets[d])))
    return out


def homogeneous_field(x: WPolyVectorField, degree: int) -> WPolyVectorField:
    ws = x.weights
    return WPolyVectorField(tuple(a.filter(lambda m, l=l: _wdeg(m, ws) - ws[l] == degree)
                                  for l, a in enumerate(x.coeffs)))


def pullback_dilation(x: WPolyVectorField, t) -> WPolyVectorField:
    """``delta_t^* X``: coefficient ``a_l(delta_t x) t^{-w_l}``."""
    ws = x.weights
    t = _frac(t)
    coeffs = []
    for l, a in enumerate(x.coeffs):
        terms = {m: c * t ** (_wdeg(m, ws) - ws[l]) for m, c in a.terms.items()}
        coeffs.append(WPoly(ws, terms, a.trunc))
    return WPolyVectorField(tuple(coeffs))


def lie_bracket(x: WPolyVectorField, y: WPolyVectorField) -> WPolyVectorField:
    """``[X,Y]_k = sum_j X_j d_j Y_k - Y_j d_j X_k``."""
    if x.n != y.n or x.weights != y.weights:
        raise ValueError("vector fields live on different spaces")
    return WPolyVectorField(tuple(x.apply(b) - y.apply(a) for a, b in zip(x.coeffs, y.coeffs)))


# ---------------------------------------------------------------------------
# composition, inversion, flows


def compose(phi: WPolyMap, psi: WPolyMap) -> WPolyMap:
    """``phi o psi`` modulo the order at which it is determined."""
    if phi.n_source != psi.n_target:
        raise CompositionError(f"cannot compose: inner map has {psi.n_target} outputs, outer expects {phi.n_source}")
    if phi.source_weights != psi.target_weights:
        raise CompositionError(f"weight mismatch: {psi.target_weights} vs {phi.source_weights}")
    images = psi.components
    trunc = substitution_trunc(phi.components, images)
    cache: dict = {}
    comps = tuple(_substitute(c, images, trunc, cache) for c in phi.components)
    return WPolyMap(comps, phi.target_weights)


def compose_polys(outer: Sequence[WPoly], images: Sequence[WPoly], trunc: Trunc = "auto") -> list[WPoly]:  # type: ignore[assignment]
    if trunc == "auto":
        trunc = substitution_trunc(list(outer), images)
    cache: dict = {}
    return [_substitute(p, images, trunc, cache) for p in outer]


def _x_linear_matrix(phi: WPolyMap, nparams: int) -> list[list[Fraction]]:
    n = phi.n_source - nparams
    rows = []
    for c in phi.components:
        row = []
        for j in range(n):
            m = tuple(int(k == nparams + j) for k in range(phi.n_source))
            row.append(c.coeff(m))
        rows.append(row)
    return rows


def invert_map(phi: WPolyMap, trunc: Trunc = None, nparams: int = 0, exact: Optional[bool] = None) -> WPolyMap:
    """Inverse of ``x -> phi(p, x)`` in the last ``n`` variables, order by order.

    The first ``nparams`` variables are parameters passed through unchanged.
    For exact input and no requested ``trunc`` a polynomial inverse is sought
    and certified by exact composition; otherwise the inverse is returned as a
    jet at the order where it is determined.
    """
    n = phi.n_target
    if phi.n_source != n + nparams:
        raise InversionError("map must be square in its non-parameter variables")
    ws = phi.source_weights
    for c in phi.components:
        for m in c.terms:
            if sum(m[nparams:]) == 0:
                raise InversionError("map has a nonzero constant term (phi(0) != 0)")
    lin = _x_linear_matrix(phi, nparams)
    try:
        lin_inv = _linalg.mat_inv(lin)
    except _linalg.SingularMatrixError as exc:
        raise InversionError("singular linear part") from exc

    want_exact = phi.is_exact() and trunc is None if exact is None else exact
    if want_exact:
        if not phi.is_exact():
            raise InversionError("exact inverse requested for a truncated map")
        r = max(ws) if ws else 1
        deg = max((c.total_degree() for c in phi.components), default=1)
        start = max(2 * r, r * deg)
        for work in (start, 2 * start, 4 * start):
            psi = _invert_iter(phi, lin_inv, work, nparams)
            cand = WPolyMap(tuple(WPoly(c.weights, c.terms, None, _trusted=True) for c in psi.components),
                            phi.target_weights)
            if _is_identity(compose_with_params(phi, cand, nparams), nparams):
                return cand
        raise InversionError("no polynomial inverse found; request a truncated inverse instead")

    work = trunc if trunc is not None else phi.trunc
    if work is None:
        raise InversionError("a truncation order is required")
    psi = _invert_iter(phi, lin_inv, work, nparams)
    if phi.is_exact():
        return psi
    # the determined order depends on how much psi lowers weights inside phi's dropped tail
    eff = min_trunc(work, substitution_trunc(phi.components, _param_images(psi, nparams)))
    return psi.truncate(eff)


def _param_images(psi: WPolyMap, nparams: int) -> list[WPoly]:
    ws = psi.source_weights
    t = psi.trunc
    params = [WPoly.var(i, ws, t) for i in range(nparams)]
    return params + list(psi.components)


def compose_with_params(phi: WPolyMap, psi: WPolyMap, nparams: int) -> WPolyMap:
    """``(p, y) -> phi(p, psi(p, y))``."""
    images = _param_images(psi, nparams)
    return WPolyMap(tuple(compose_polys(phi.components, images)), phi.target_weights)


def _is_identity(m: WPolyMap, nparams: int) -> bool:
    ws = m.source_weights
    return all(c == WPoly.var(nparams + k, ws) for k, c in enumerate(m.components))


def _invert_iter(phi: WPolyMap, lin_inv, work: int, nparams: int) -> WPolyMap:
    ws = phi.source_weights
    n = phi.n_target
    lin = _x_linear_matrix(phi, nparams)
    lin_map = [sum((WPoly.var(nparams + j, ws) * lin[k][j] for j in range(n)), WPoly.zero(ws))
               for k in range(n)]
    nonlinear = [c - l for c, l in zip(phi.components, lin_map)]
    ys = [WPoly.var(nparams + k, ws, work) for k in range(n)]
    params = [WPoly.var(i, ws, work) for i in range(nparams)]
    psi = [sum((ys[j] * lin_inv[k][j] for j in range(n)), WPoly.zero(ws, work)) for k in range(n)]
    for _ in range(work + 3):
        nl = _compose_fixed(nonlinear, params + psi, work)
        rhs = [y - v for y, v in zip(ys, nl)]
        new = [sum((rhs[j] * lin_inv[k][j] for j in range(n)), WPoly.zero(ws, work)) for k in range(n)]
        if all(a == b for a, b in zip(new, psi)):
            return WPolyMap(tuple(new), phi.target_weights)
        psi = new
    raise InversionError("order-by-order inversion did not stabilize")


def _compose_fixed(outer: Sequence[WPoly], images: Sequence[WPoly], trunc: Trunc) -> list[WPoly]:
    cache: dict = {}
    return [_substitute(p, images, trunc, cache) for p in outer]


def flow_exp(fields: Sequence[WPolyVectorField], trunc: Trunc = None, base: Sequence | None = None,
             max_iter: int | None = None) -> WPolyMap:
    """``x -> exp(sum_j x_j X_j)(base)`` as a jet in the coefficients ``x``.

    Picard iteration of ``y' = sum_j x_j X_j(y)`` from ``base``; the solution at
    time 1 restricted to monomials of total degree ``d`` in ``x`` picks up the
    factor ``1/d`` from integrating ``s^{d-1}`` over ``[0, 1]``.
    """
    if not fields:
        raise ValueError("no fields")
    ws = fields[0].weights
    n = len(ws)
    if len(fields) != n:
        raise ValueError("need one field per coordinate")
    if trunc is None:
        trunc = 2 * max(ws)
    base = tuple(Fraction(0) for _ in ws) if base is None else tuple(_frac(b) for b in base)
    coeffs = [[translate_poly(a, base) if a.trunc is None else _recentred_truncated(a, base)
               for a in f.coeffs] for f in fields]
    u = flow_jet(coeffs, 0, ws, trunc, max_iter=max_iter)
    comps = tuple(c + b for c, b in zip(u, base))
    return WPolyMap(comps, ws)


def flow_polynomial(fields: Sequence[WPolyVectorField], trunc: int | None = None) -> Optional[WPolyMap]:
    """The flow map ``x -> exp(sum_j x_j X_j)(0)`` as an exact polynomial, or ``None``.

    A candidate is read off the jet at ``trunc`` and certified through the
    Euler identity ``sum_i x_i d_i P = sum_j x_j X_j(P)``, which together with
    ``P(0) = 0`` characterizes the flow.
    """
    if any(f.trunc is not None for f in fields):
        return None
    ws = fields[0].weights
    n = len(ws)
    if trunc is None:
        trunc = 2 * max(ws)
    try:
        jet = flow_exp(fields, trunc=trunc)
    except FlowError:
        return None
    cand = [WPoly(ws, c.terms, None, _trusted=True) for c in jet.components]
    xs = [WPoly.var(j, ws) for j in range(n)]
    for l in range(n):
        euler = WPoly(ws, {m: c * sum(m) for m, c in cand[l].terms.items()}, None, _trusted=True)
        rhs = WPoly.zero(ws)
        for j, f in enumerate(fields):
            if not f.coeffs[l].is_zero():
                rhs = rhs + xs[j] * _substitute(f.coeffs[l], cand, None, {})
        if euler != rhs:
            return None
    return WPolyMap(tuple(cand), ws)


def _recentred_truncated(a: WPoly, base) -> WPoly:
    if any(b != 0 for b in base):
        raise TruncationError("truncated frame can only be flowed from its own centre")
    return a


def flow_jet(coeffs: Sequence[Sequence[WPoly]], nparams: int, xweights: Sequence[int], trunc: int,
             x_cap: int | None = None, max_iter: int | None = None) -> list[WPoly]:
    """Picard iteration in the ring ``(p, x)``.

    ``coeffs[j][l]`` is the ``d_l`` coefficient of field ``j`` as a polynomial
    in ``(p, u)`` (``u`` recentred at the base point).  Returns ``u(p, x)``.
    ``x_cap`` optionally discards monomials of ``x``-weight above it.
    """
    ws = coeffs[0][0].weights
    n = len(xweights)
    xw = tuple(xweights)
    xvars = [WPoly.var(nparams + j, ws, trunc) for j in range(n)]
    params = [WPoly.var(i, ws, trunc) for i in range(nparams)]

    def cap(p: WPoly) -> WPoly:
        if x_cap is None:
            return p
        return p.filter(lambda m: _wdeg(m[nparams:], xw) <= x_cap)

    u = [WPoly.zero(ws, trunc) for _ in range(n)]
    limit = max_iter if max_iter is not None else trunc + 2
    for _ in range(limit + 1):
        images = params + u
        values = [_compose_fixed(col, images, trunc) for col in coeffs]
        rhs = []
        for l in range(n):
            acc = WPoly.zero(ws, trunc)
            for j in range(n):
                if not values[j][l].is_zero():
                    acc = acc + xvars[j] * values[j][l]
            rhs.append(cap(acc))
        new = []
        for r in rhs:
            terms = {}
            for m, c in r.terms.items():
                d = sum(m[nparams:])
                terms[m] = c / d
            new.append(WPoly(ws, terms, trunc, _trusted=True))
        if all(a == b for a, b in zip(new, u)):
            return new
        u = new
    raise FlowError(f"Picard iteration did not stabilize within {limit} steps; truncation insufficient")


# ---------------------------------------------------------------------------
# parametrized remainders


@dataclass(frozen=True)
class ParamRemainder:
    """``t^{-1}.theta(x, t.y) = t^m * remainder(x, y, t)`` with ``t`` the last variable.

    ``remainder`` is stored as an exact polynomial; when ``base`` is a jet the
    identity holds modulo monomials of weighted degree above ``trunc``.
    """

    base: WPolyMap
    order: int
    remainder: WPolyMap
    nparams: int
    trunc: Trunc = None

    def evaluate(self, x: Sequence, y: Sequence, t) -> tuple:
        return self.remainder(tuple(x) + tuple(y) + (t,))

    def at_t_zero(self) -> WPolyMap:
        """``remainder(x, y, 0)`` as a map in ``(x, y)``."""
        ws = self.base.source_weights
        comps = []
        for c in self.remainder.components:
            terms = {m[:-1]: v for m, v in c.terms.items() if m[-1] == 0}
            comps.append(WPoly(ws, terms, self.trunc))
        return WPolyMap(tuple(comps), self.base.target_weights)

    def first_order(self) -> WPolyMap:
        """``(remainder(x,y,t) - remainder(x,y,0)) / t`` in ``(x, y, t)``."""
        comps = []
        for c in self.remainder.components:
            terms = {m[:-1] + (m[-1] - 1,): v for m, v in c.terms.items() if m[-1] > 0}
            comps.append(WPoly(c.weights, terms, None, _trusted=True))
        return WPolyMap(tuple(comps), self.remainder.target_weights)


def param_remainder(theta: WPolyMap, m: int, nparams: int = 0) -> ParamRemainder:
    """Factor ``t^{-1}.theta(x, t.y)`` as ``t^m`` times a polynomial in ``(x, y, t)``.

    The first ``nparams`` variables are the parameters ``x``; the rest are
    dilated.  Every monomial must satisfy ``<a>_y - w'_k >= m``.
    """
    ws = theta.source_weights
    ys = ws[nparams:]
    out_ws = ws + (1,)
    comps = []
    for k, (c, wk) in enumerate(zip(theta.components, theta.target_weights)):
        terms = {}
        for mon, v in c.sorted_terms():
            e = _wdeg(mon[nparams:], ys) - wk - m
            if e < 0:
                raise OrderViolation(
                    f"component {k + 1}: monomial {mon} has rescaling exponent {e + m} < {m}")
            terms[mon + (e,)] = v
        comps.append(WPoly(out_ws, terms, None, _trusted=True))
    rem = WPolyMap(tuple(comps), theta.target_weights)
    return ParamRemainder(theta, m, rem, nparams, theta.trunc)


# ---------------------------------------------------------------------------
# matrices of polynomials


def matrix_inverse_series(mat: Sequence[Sequence[WPoly]], trunc: Trunc) -> list[list[WPoly]]:
    """Inverse of a polynomial matrix invertible at the origin, by Neumann expansion.

    With ``N = M(0)^{-1}(M - M(0))`` the inverse is ``sum_k (-N)^k M(0)^{-1}``.
    When ``N`` is nilpotent the sum is finite and the result exact; otherwise it
    is a jet truncated at ``trunc`` (``N`` has no constant term, so ``N^k``
    starts in weighted degree ``>= k``).
    """
    n = len(mat)
    if n == 0:
        return []
    ws = mat[0][0].weights
    m0 = [[p.constant_term() for p in row] for row in mat]
    m0inv = _linalg.mat_inv(m0)
    diff = [[mat[i][j] - m0[i][j] for j in range(n)] for i in range(n)]
    nmat = [[sum((diff[k][j] * m0inv[i][k] for k in range(n)), WPoly.zero(ws)) for j in range(n)]
            for i in range(n)]
    neg = [[-p for p in row] for row in nmat]
    exact_inputs = all(p.trunc is None for row in mat for p in row)
    # nilpotency test: N^n == 0 exactly
    if exact_inputs:
        power = neg
        nilpotent = False
        for _ in range(n):
            if _linalg.is_zero_matrix(power):
                nilpotent = True
                break
            power = _linalg.mat_mul(power, neg)
        nilpotent = nilpotent or _linalg.is_zero_matrix(power)
        if nilpotent:
            total = _poly_identity(n, ws, None)
            power = _poly_identity(n, ws, None)
            for _ in range(n):
                power = _linalg.mat_mul(power, neg)
                if _linalg.is_zero_matrix(power):
                    break
                total = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(total, power)]
            return _linalg.mat_mul(total, _const_matrix(m0inv, ws, None))
    if trunc is None:
        raise TruncationError("matrix inverse is not polynomial; a truncation order is required")
    negt = [[p.truncate(trunc) for p in row] for row in neg]
    total = _poly_identity(n, ws, trunc)
    power = _poly_identity(n, ws, trunc)
    for _ in range(trunc + 1):
        power = [[sum((power[i][k] * negt[k][j] for k in range(n)), WPoly.zero(ws, trunc)) for j in range(n)]
                 for i in range(n)]
        if _linalg.is_zero_matrix(power):
            break
        total = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(total, power)]
    return _linalg.mat_mul(total, _const_matrix(m0inv, ws, trunc))


def _poly_identity(n: int, ws, trunc: Trunc) -> list[list[WPoly]]:
    return [[WPoly.const(int(i == j), ws, trunc) for j in range(n)] for i in range(n)]


def _const_matrix(m, ws, trunc: Trunc) -> list[list[WPoly]]:
    return [[WPoly.const(v, ws, trunc) for v in row] for row in m]
