"""Independent reference computations used to cross-check the package.

Nothing here calls the package's own series, bracket or substitution code.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import factorial

import sympy as sp

# ---------------------------------------------------------------------------
# BCH through the free associative algebra


def _word_mul(a: dict, b: dict, depth: int) -> dict:
    out: dict = {}
    for u, cu in a.items():
        for v, cv in b.items():
            if len(u) + len(v) <= depth:
                w = u + v
                out[w] = out.get(w, 0) + cu * cv
    return {w: c for w, c in out.items() if c != 0}


def _add(a: dict, b: dict, s=1) -> dict:
    out = dict(a)
    for w, c in b.items():
        out[w] = out.get(w, 0) + s * c
    return {w: c for w, c in out.items() if c != 0}


def _exp(letter: str, depth: int) -> dict:
    return {(letter,) * k: Fraction(1, factorial(k)) for k in range(depth + 1)}


def _log_one_plus(z: dict, depth: int) -> dict:
    out: dict = {}
    power = {(): Fraction(1)}
    for k in range(1, depth + 1):
        power = _word_mul(power, z, depth)
        out = _add(out, {w: c * Fraction((-1) ** (k + 1), k) for w, c in power.items()})
    return out


def bch_words(depth: int) -> dict:
    """``log(exp X exp Y)`` as a combination of words in ``X`` and ``Y`` up to length ``depth``."""
    z = _word_mul(_exp("X", depth), _exp("Y", depth), depth)
    z.pop((), None)
    return _log_one_plus(z, depth)


def bracket_from_constants(L, n: int):
    """``[u, v]_k = sum_ij u_i v_j L(i, j, k)`` with ``L`` a callable."""

    def br(u, v):
        return [sum(u[i] * v[j] * L(i, j, k) for i in range(n) for j in range(n)) for k in range(n)]

    return br


def bch_oracle(L, n: int, r: int, x, y) -> tuple:
    """Group product from the free-algebra BCH, projected with the Specht-Wever map."""
    br = bracket_from_constants(L, n)
    vals = {"X": [Fraction(v) for v in x], "Y": [Fraction(v) for v in y]}
    total = [Fraction(0)] * n
    for w, c in bch_words(r).items():
        # Lie element of degree m: sum of words c_w w equals (1/m) sum c_w [w1,[w2,...,wm]]
        m = len(w)
        acc = vals[w[-1]]
        for letter in reversed(w[:-1]):
            acc = br(vals[letter], acc)
        total = [t + Fraction(c) / m * a for t, a in zip(total, acc)]
    return tuple(total)


# ---------------------------------------------------------------------------
# sympy mirrors of polynomials and vector fields


def sym_vars(n: int, name: str = "x"):
    return sp.symbols(f"{name}1:{n + 1}")


def to_sympy(p, xs):
    expr = sp.Integer(0)
    for m, c in p.terms.items():
        term = sp.Rational(c.numerator, c.denominator)
        for v, e in zip(xs, m):
            term *= v**e
        expr += term
    return sp.expand(expr)


def sym_bracket(X, Y, xs):
    """Lie bracket of vector fields given as lists of sympy coefficients."""
    n = len(xs)
    return [sp.expand(sum(X[i] * sp.diff(Y[k], xs[i]) - Y[i] * sp.diff(X[k], xs[i]) for i in range(n)))
            for k in range(n)]


def weighted_truncate(expr, xs, weights, N):
    """Drop monomials of weighted degree above ``N``."""
    poly = sp.Poly(sp.expand(expr), *xs)
    out = sp.Integer(0)
    for mon, c in poly.terms():
        if sum(w * e for w, e in zip(weights, mon)) <= N:
            term = c
            for v, e in zip(xs, mon):
                term *= v**e
            out += term
    return sp.expand(out)


def grid(n: int, values=(-2, -1, 0, Fraction(1, 2), 1, 2)):
    return [tuple(Fraction(v) for v in p) for p in product(values, repeat=n)]


# ---------------------------------------------------------------------------
# flows by Picard iteration on sympy expressions


def picard_flow(fields, xs, s, order: int):
    """Time-``s`` flow of ``sum s_j X_j`` as a power series in ``s`` to total order ``order``.

    ``fields`` are lists of sympy coefficients and ``s`` is a tuple of symbols.
    """
    n = len(xs)
    tau = sp.Symbol("tau")
    cur = list(xs)
    for _ in range(order + 1):
        # gamma(1; s) = x + int_0^1 V_s(gamma(1; tau s)) dtau
        sub = {xs[k]: cur[k].subs({v: v * tau for v in s}, simultaneous=True) for k in range(n)}
        vel = [sum(s[j] * sp.sympify(fields[j][k]).subs(sub, simultaneous=True) for j in range(len(fields))) for k in range(n)]
        cur = [sp.expand(xs[k] + sp.integrate(sp.expand(vel[k]), (tau, 0, 1))) for k in range(n)]
        cur = [_cap_s(c, s, order) for c in cur]
    return cur


def _cap_s(expr, s, order):
    poly = sp.Poly(sp.expand(expr), *s)
    out = sp.Integer(0)
    for mon, c in poly.terms():
        if sum(mon) <= order:
            term = c
            for v, e in zip(s, mon):
                term *= v**e
            out += term
    return sp.expand(out)
