"""Closed-form integrals over [0, 1] for homotopy formulas.

Handles integrands that are rational in the integration variable with a
denominator of degree at most two after cancelling powers of the variable.
Anything else is left as an :class:`~.core.Integral` node, which evaluates
by Gauss-Legendre quadrature.
"""
from __future__ import annotations

from fractions import Fraction

from .core import (
    ONE, ZERO, Add, Expr, Mul, Num, Pow, Sym,
    add, div, func, integral01, is_num, mul, power, sub,
)

Poly = list  # coefficient list, lowest degree first


def _trim(p: Poly) -> Poly:
    p = list(p)
    while len(p) > 1 and is_num(p[-1], 0):
        p.pop()
    return p


def _padd(p: Poly, q: Poly) -> Poly:
    n = max(len(p), len(q))
    return _trim([add(p[i] if i < len(p) else ZERO, q[i] if i < len(q) else ZERO) for i in range(n)])


def _pmul(p: Poly, q: Poly) -> Poly:
    out = [[] for _ in range(len(p) + len(q) - 1)]
    for i, a in enumerate(p):
        if is_num(a, 0):
            continue
        for j, b in enumerate(q):
            if not is_num(b, 0):
                out[i + j].append(mul(a, b))
    return _trim([add(*terms) if terms else ZERO for terms in out])


def _ppow(p: Poly, k: int) -> Poly:
    r = [ONE]
    for _ in range(k):
        r = _pmul(r, p)
    return r


def poly_coeffs(e: Expr, u: str):
    """Coefficients of ``e`` as a polynomial in ``u``, or None."""
    r = as_rational(e, u)
    if r is None or len(r[1]) != 1:
        return None
    den = r[1][0]
    return [div(c, den) for c in r[0]]


def as_rational(e: Expr, u: str):
    """``(numerator, denominator)`` coefficient lists in ``u`` or None."""
    if u not in e.free_symbols:
        return [e], [ONE]
    if isinstance(e, Sym):
        return [ZERO, ONE], [ONE]
    if isinstance(e, Add):
        num, den = [ZERO], [ONE]
        for t in e.terms:
            r = as_rational(t, u)
            if r is None:
                return None
            n2, d2 = r
            if d2 == den:
                num = _padd(num, n2)
            else:
                num = _padd(_pmul(num, d2), _pmul(n2, den))
                den = _pmul(den, d2)
        return num, den
    if isinstance(e, Mul):
        num, den = [ONE], [ONE]
        for f in e.factors:
            r = as_rational(f, u)
            if r is None:
                return None
            num = _pmul(num, r[0])
            den = _pmul(den, r[1])
        return num, den
    if isinstance(e, Pow) and e.exp.denominator == 1:
        r = as_rational(e.base, u)
        if r is None:
            return None
        k = e.exp.numerator
        n, d = r
        if k < 0:
            n, d, k = d, n, -k
        return _ppow(n, k), _ppow(d, k)
    return None


def _lowest(p: Poly) -> int:
    for i, c in enumerate(p):
        if not is_num(c, 0):
            return i
    return len(p)


def integrate01(e: Expr, u: str, allow_numeric: bool = True) -> Expr | None:
    """Closed form of the integral of ``e`` over ``u`` in [0, 1].

    Returns an :class:`Integral` node when no closed form is found and
    ``allow_numeric`` is set, otherwise None.
    """
    if u not in e.free_symbols:
        return e
    r = as_rational(e, u)
    out = None if r is None else _integrate_rational(*r)
    if out is None:
        return integral01(u, e) if allow_numeric else None
    return out


def _integrate_rational(num: Poly, den: Poly) -> Expr | None:
    num, den = _trim(num), _trim(den)
    # cancel common powers of u
    k = _lowest(den)
    if k:
        if _lowest(num) < k:
            return None  # non-integrable singularity at u = 0
        num, den = num[k:], den[k:]
    if len(den) == 1:
        inv = power(den[0], -1)
        return mul(inv, add(*(mul(c, Num(Fraction(1, i + 1))) for i, c in enumerate(num))))
    if len(den) > 3:
        return None
    # polynomial long division
    lead = den[-1]
    inv_lead = power(lead, -1)
    rem = list(num)
    quot = [ZERO] * max(1, len(num) - len(den) + 1)
    for i in range(len(num) - len(den), -1, -1):
        q = mul(rem[i + len(den) - 1], inv_lead)
        quot[i] = q
        for j, dj in enumerate(den):
            rem[i + j] = sub(rem[i + j], mul(q, dj))
    rem = rem[: len(den) - 1]
    parts = [mul(c, Num(Fraction(1, i + 1))) for i, c in enumerate(quot)]
    if len(den) == 2:
        c0, c1 = den
        a0 = rem[0]
        # a0 / (c1 u + c0)  ->  a0/c1 ln((c1 + c0)/c0)
        parts.append(mul(a0, power(c1, -1), func("ln", mul(add(c0, c1), power(c0, -1)))))
        return add(*parts)
    c, b, a = den
    r0 = rem[0] if rem else ZERO
    r1 = rem[1] if len(rem) > 1 else ZERO
    # (r1 u + r0) / (a u^2 + b u + c), assuming 4ac - b^2 > 0 on the domain
    if not is_num(r1, 0):
        parts.append(mul(r1, power(mul(Num(2), a), -1), func("ln", mul(add(a, b, c), power(c, -1)))))
    coef = sub(r0, mul(r1, b, power(mul(Num(2), a), -1)))
    if not is_num(coef, 0):
        disc = power(sub(mul(Num(4), a, c), power(b, 2)), Fraction(1, 2))
        inv_disc = power(disc, -1)
        atan_hi = func("arctan", mul(add(mul(Num(2), a), b), inv_disc))
        atan_lo = func("arctan", mul(b, inv_disc))
        parts.append(mul(Num(2), coef, inv_disc, sub(atan_hi, atan_lo)))
    return add(*parts)
