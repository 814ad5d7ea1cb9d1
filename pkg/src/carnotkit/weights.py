"""Weight sequences, multi-indices, anisotropic dilations and the pseudo-norm."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence, Union

Scalar = Union[Fraction, int, float]
MultiIndex = tuple[int, ...]


class WeightError(ValueError):
    """Raised for malformed weight data or length mismatches."""


@dataclass(frozen=True)
class WeightSequence:
    """Non-decreasing weights ``w_1 = 1 <= ... <= w_n = r``."""

    w: tuple[int, ...]

    def __post_init__(self) -> None:
        w = tuple(int(v) for v in self.w)
        object.__setattr__(self, "w", w)
        if not w:
            raise WeightError("weight sequence must be non-empty")
        if any(v < 1 for v in w):
            raise WeightError(f"weights must be positive integers, got {w}")
        if any(a > b for a, b in zip(w, w[1:])):
            raise WeightError(f"non-normalized weight sequence {w}: weights must be non-decreasing")
        if w[0] != 1:
            raise WeightError(f"non-normalized weight sequence {w}: first weight must be 1")

    @property
    def n(self) -> int:
        return len(self.w)

    @property
    def r(self) -> int:
        return self.w[-1]

    def __len__(self) -> int:
        return len(self.w)

    def __iter__(self):
        return iter(self.w)

    def __getitem__(self, i: int) -> int:
        return self.w[i]

    def default_trunc(self) -> int:
        return 2 * self.r


def as_weights(w: WeightSequence | Sequence[int]) -> tuple[int, ...]:
    """Return a plain tuple of weights (no normalization check)."""
    if isinstance(w, WeightSequence):
        return w.w
    return tuple(int(v) for v in w)


def weighted_degree(alpha: Sequence[int], w: WeightSequence | Sequence[int]) -> int:
    """``<alpha> = sum w_i alpha_i``."""
    ws = as_weights(w)
    if len(alpha) != len(ws):
        raise WeightError(f"multi-index of length {len(alpha)} against {len(ws)} weights")
    return sum(a * b for a, b in zip(alpha, ws))


def _power(t: Scalar, k: int) -> Scalar:
    return t**k


def dilate(t: Scalar, x: Sequence[Scalar], w: WeightSequence | Sequence[int]) -> tuple:
    """``delta_t(x) = (t^{w_1} x_1, ..., t^{w_n} x_n)``; any scalar t, including 0 and negatives."""
    ws = as_weights(w)
    if len(x) != len(ws):
        raise WeightError(f"point of length {len(x)} against {len(ws)} weights")
    if isinstance(t, Rational) and not isinstance(t, Fraction):
        t = Fraction(t)
    return tuple(_power(t, k) * xi for k, xi in zip(ws, x))


def pseudo_norm(x: Sequence[Scalar], w: WeightSequence | Sequence[int]) -> float:
    """``||x||_1 = sum |x_i|^{1/w_i}``, homogeneous of degree one under dilations."""
    ws = as_weights(w)
    if len(x) != len(ws):
        raise WeightError(f"point of length {len(x)} against {len(ws)} weights")
    total = 0.0
    for k, xi in zip(ws, x):
        a = abs(xi)
        if a == 0:
            continue
        if k == 1:
            total += float(a)
        else:
            total += float(a) ** (1.0 / k)
    return total


def as_point(values: Sequence, n: int | None = None) -> tuple[Fraction, ...]:
    """Coerce a sequence of ints/strings/Fractions to exact rationals."""
    out = tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in values)
    if n is not None and len(out) != n:
        raise WeightError(f"expected a point of length {n}, got {len(out)}")
    return out
