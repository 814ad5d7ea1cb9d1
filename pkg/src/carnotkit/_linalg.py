"""Small dense linear algebra over exact rationals (or any field-like scalars)."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list]


class SingularMatrixError(ValueError):
    pass


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(rows: int, cols: int) -> Matrix:
    return [[Fraction(0)] * cols for _ in range(rows)]


def mat_inv(a: Sequence[Sequence]) -> Matrix:
    """Gauss-Jordan inverse with exact pivots."""
    n = len(a)
    m = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise SingularMatrixError("matrix is singular")
        m[col], m[pivot] = m[pivot], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * u for v, u in zip(m[r], m[col])]
    return [row[n:] for row in m]


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    cols = len(b[0]) if b else 0
    out = []
    for row in a:
        out_row = []
        for j in range(cols):
            acc = None
            for k, v in enumerate(row):
                term = v * b[k][j]
                acc = term if acc is None else acc + term
            out_row.append(acc if acc is not None else Fraction(0))
        out.append(out_row)
    return out


def mat_vec(a: Sequence[Sequence], x: Sequence) -> list:
    out = []
    for row in a:
        acc = None
        for v, xi in zip(row, x):
            term = v * xi
            acc = term if acc is None else acc + term
        out.append(acc if acc is not None else Fraction(0))
    return out


def transpose(a: Sequence[Sequence]) -> Matrix:
    return [list(col) for col in zip(*a)]


def is_zero_matrix(a: Sequence[Sequence]) -> bool:
    return all(v == 0 for row in a for v in row)
