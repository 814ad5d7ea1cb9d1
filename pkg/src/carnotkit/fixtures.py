"""Standard frames, groups and maps used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .carnot_structure import HFrame
from .nilgroup import GradedNilpotentAlgebra, NilpotentGroup, engel_algebra, heisenberg_algebra
from .weights import WeightSequence
from .wpoly import WPoly, WPolyMap, WPolyVectorField


def _field(ws, coeffs: Sequence) -> WPolyVectorField:
    return WPolyVectorField(tuple(c if isinstance(c, WPoly) else WPoly.const(c, ws) for c in coeffs))


def abelian_frame(n: int = 2) -> HFrame:
    return HFrame.coordinate((1,) * n)


def heisenberg_group() -> NilpotentGroup:
    return NilpotentGroup(heisenberg_algebra())


def heisenberg_frame() -> HFrame:
    """Left-invariant frame ``d1 - x2/2 d3``, ``d2 + x1/2 d3``, ``d3`` in exponential coordinates."""
    return HFrame.from_group(heisenberg_group())


def engel_group() -> NilpotentGroup:
    return NilpotentGroup(engel_algebra())


def engel_group_frame() -> HFrame:
    return HFrame.from_group(engel_group())


def engel_frame() -> HFrame:
    """``X1 = d1``, ``X2 = d2 + x1 d3 + x1^2/2 d4``, ``X3 = d3 + x1 d4``, ``X4 = d4`` with ``w = (1,1,2,3)``."""
    ws = (1, 1, 2, 3)
    x1 = WPoly.var(0, ws)
    return HFrame(ws, (
        _field(ws, (1, 0, 0, 0)),
        _field(ws, (0, 1, x1, x1 * x1 / 2)),
        _field(ws, (0, 0, 1, x1)),
        _field(ws, (0, 0, 0, 1)),
    ))


def perturbed_heisenberg_frame() -> HFrame:
    """``X1 = (1 + x3) d1 - x2/2 d3``; not left-invariant for any group law."""
    ws = (1, 1, 2)
    x = [WPoly.var(i, ws) for i in range(3)]
    return HFrame(ws, (
        _field(ws, (1 + x[2], 0, -x[1] / 2)),
        _field(ws, (0, 1, x[0] / 2)),
        _field(ws, (0, 0, 1)),
    ))


def asymmetric_heisenberg_frame() -> HFrame:
    """``X1 = d1 - x2 d3``, ``X2 = d2``: privileged but not Carnot."""
    ws = (1, 1, 2)
    x2 = WPoly.var(1, ws)
    return HFrame(ws, (_field(ws, (1, 0, -x2)), _field(ws, (0, 1, 0)), _field(ws, (0, 0, 1))))


def heatlift(frame: HFrame) -> HFrame:
    """Add a time coordinate ``s`` with ``d_s`` of weight 2 (placed after the last weight-2 slot).

    The lifted filtration is Carnot but never bracket generating.
    """
    ws = frame.weights.w
    pos = sum(1 for w in ws if w <= 2)
    new_ws = ws[:pos] + (2,) + ws[pos:]

    def lift(p: WPoly) -> WPoly:
        terms = {m[:pos] + (0,) + m[pos:]: c for m, c in p.terms.items()}
        return WPoly(new_ws, terms, p.trunc)

    fields = []
    for f in frame.fields:
        coeffs = [lift(c) for c in f.coeffs]
        coeffs.insert(pos, WPoly.zero(new_ws, f.trunc))
        fields.append(WPolyVectorField(tuple(coeffs)))
    fields.insert(pos, WPolyVectorField.coordinate(pos, new_ws))
    bp = tuple(frame.basepoint[:pos]) + (Fraction(0),) + tuple(frame.basepoint[pos:])
    return HFrame(WeightSequence(new_ws), tuple(fields), bp)


# ---------------------------------------------------------------------------
# maps


def heisenberg_swap() -> WPolyMap:
    """The automorphism ``(x2, x1, -x3)``."""
    ws = (1, 1, 2)
    x = [WPoly.var(i, ws) for i in range(3)]
    return WPolyMap((x[1], x[0], -x[2]), ws)


def dilation_map(t, weights: Sequence[int] = (1, 1, 2)) -> WPolyMap:
    return WPolyMap.dilation(t, weights)


def heisenberg_cubic() -> WPolyMap:
    """``(x1, x2, x3 + x1^3)``; a Carnot map exactly where ``x1 = 0``."""
    ws = (1, 1, 2)
    x = [WPoly.var(i, ws) for i in range(3)]
    return WPolyMap((x[0], x[1], x[2] + x[0] ** 3), ws)


def heisenberg_contact() -> WPolyMap:
    """``(x1, x2 + x1^2, x3 + x1^3/6)``; a contact map of the Heisenberg group everywhere."""
    ws = (1, 1, 2)
    x = [WPoly.var(i, ws) for i in range(3)]
    return WPolyMap((x[0], x[1] + x[0] ** 2, x[2] + x[0] ** 3 / 6), ws)


def frame_fixtures() -> dict[str, HFrame]:
    return {
        "abelian2": abelian_frame(2),
        "heisenberg3": heisenberg_frame(),
        "engel4": engel_frame(),
        "engel_group": engel_group_frame(),
        "heisenberg_perturbed": perturbed_heisenberg_frame(),
        "heisenberg_heat": heatlift(heisenberg_frame()),
    }


def group_fixtures() -> dict[str, NilpotentGroup]:
    return {
        "abelian2": NilpotentGroup(GradedNilpotentAlgebra.abelian((1, 1))),
        "heisenberg3": heisenberg_group(),
        "engel4": engel_group(),
    }
