"""Render expressions in the input grammar, so that ``parse(to_string(e))``
rebuilds ``e``."""
from __future__ import annotations

from fractions import Fraction

from .core import Add, Expr, Func, Integral, Mul, Num, Pow, Sym


def _num(v: Fraction, atom: bool) -> str:
    s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if atom and (v < 0 or v.denominator != 1):
        return f"({s})"
    return s


def _exponent(k: Fraction) -> str:
    if k.denominator == 1:
        return str(k.numerator) if k > 0 else f"({k.numerator})"
    return f"({k.numerator}/{k.denominator})"


def _atom(e: Expr) -> str:
    """Render as something that can sit under ``^`` or in a product."""
    if isinstance(e, Num):
        return _num(e.value, atom=True)
    if isinstance(e, (Sym, Func, Integral)):
        return to_string(e)
    return f"({to_string(e)})"


def _factor(e: Expr) -> str:
    if isinstance(e, Pow):
        return f"{_atom(e.base)}^{_exponent(e.exp)}"
    if isinstance(e, Add):
        return f"({to_string(e)})"
    return _atom(e)


def _product(factors: tuple) -> str:
    coeff = Fraction(1)
    num, den = [], []
    for f in factors:
        if isinstance(f, Num):
            coeff *= f.value
        elif isinstance(f, Pow) and f.exp < 0:
            den.append(f.base if f.exp == -1 else Pow(f.base, -f.exp))
        else:
            num.append(f)
    parts = [_factor(f) for f in num]
    head = ""
    if coeff.denominator != 1:
        den.insert(0, Num(coeff.denominator))
        coeff = Fraction(coeff.numerator)
    if coeff < 0:
        head = "-"
        coeff = -coeff
    if coeff != 1 or not parts:
        parts.insert(0, str(coeff.numerator))
    s = head + "*".join(parts)
    for d in den:
        s += "/" + _factor(d)
    return s


def to_string(e: Expr) -> str:
    if isinstance(e, Num):
        return _num(e.value, atom=False)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Integral):
        # not part of the input grammar; numeric-only expressions
        return f"int01[{e.var}]({to_string(e.body)})"
    if isinstance(e, Pow):
        return _product((e,))
    if isinstance(e, Mul):
        return _product(e.factors)
    if isinstance(e, Add):
        out = ""
        for i, t in enumerate(e.terms):
            s = to_string(t)
            if i == 0:
                out = s
            elif s.startswith("-"):
                out += " - " + s[1:]
            else:
                out += " + " + s
        return out
    raise TypeError(type(e))
