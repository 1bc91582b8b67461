"""Numeric evaluation.

Expressions are compiled to Python functions with common subexpressions
hoisted; a scalar flavour (``math``) and an array flavour (``numpy``) share
the generator. Division by zero, logarithms of non-positive numbers and
even roots of negative numbers raise :class:`DomainError` instead of
producing NaN.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .core import Add, Expr, Func, Integral, Mul, Num, Pow, Sym

GAUSS_NODES = 32


class DomainError(ArithmeticError):
    def __init__(self, message: str, expr: Expr | None = None):
        text = message if expr is None else f"{message} in {expr}"
        super().__init__(text)
        self.expr = expr


class UnboundSymbolError(KeyError):
    def __init__(self, names):
        super().__init__(f"unbound symbols: {sorted(names)}")
        self.names = sorted(names)


@lru_cache(maxsize=None)
def gauss_legendre01(n: int = GAUSS_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


class _Fail(Exception):
    def __init__(self, idx, message):
        self.idx = idx
        self.message = message


def _scalar_lib():
    def inv(x, i):
        if x == 0:
            raise _Fail(i, "division by zero")
        return 1.0 / x

    def ln(x, i):
        if x <= 0:
            raise _Fail(i, "logarithm of non-positive value")
        return math.log(x)

    def exp(x, i):
        try:
            return math.exp(x)
        except OverflowError:
            raise _Fail(i, "overflow") from None

    def ipow(x, k, i):
        try:
            return x**k
        except OverflowError:
            raise _Fail(i, "overflow") from None

    def rpow(x, p, q, i):
        if x < 0:
            if q % 2 == 0:
                raise _Fail(i, "even root of negative value")
            r = -((-x) ** (1.0 / q))
        else:
            r = x ** (1.0 / q)
        if p < 0:
            if r == 0:
                raise _Fail(i, "division by zero")
            r = 1.0 / r
            p = -p
        return r**p

    def tan(x, i):
        c = math.cos(x)
        if c == 0:
            raise _Fail(i, "tan pole")
        return math.sin(x) / c

    def quad(body, args):
        nodes, weights = gauss_legendre01()
        return math.fsum(float(w) * body(*args, float(u)) for u, w in zip(nodes, weights))

    return {
        "_inv": inv, "_ln": ln, "_exp": exp, "_ipow": ipow, "_rpow": rpow, "_tan": tan,
        "_sin": math.sin, "_cos": math.cos, "_atan": math.atan, "_abs": abs, "_quad": quad,
    }


def _array_lib():
    def inv(x, i):
        x = np.asarray(x, dtype=float)
        if np.any(x == 0):
            raise _Fail(i, "division by zero")
        return 1.0 / x

    def ln(x, i):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise _Fail(i, "logarithm of non-positive value")
        return np.log(x)

    def exp(x, i):
        with np.errstate(over="ignore"):
            r = np.exp(x)
        if not np.all(np.isfinite(r)):
            raise _Fail(i, "overflow")
        return r

    def ipow(x, k, i):
        return np.asarray(x, dtype=float) ** k

    def rpow(x, p, q, i):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            if q % 2 == 0:
                raise _Fail(i, "even root of negative value")
            r = np.sign(x) * np.abs(x) ** (1.0 / q)
        else:
            r = x ** (1.0 / q)
        if p < 0:
            if np.any(r == 0):
                raise _Fail(i, "division by zero")
            r = 1.0 / r
            p = -p
        return r**p

    def tan(x, i):
        c = np.cos(x)
        if np.any(c == 0):
            raise _Fail(i, "tan pole")
        return np.sin(x) / c

    def quad(body, args):
        nodes, weights = gauss_legendre01()
        total = 0.0
        for u, w in zip(nodes, weights):
            total = total + w * body(*args, u)
        return total

    return {
        "_inv": inv, "_ln": ln, "_exp": exp, "_ipow": ipow, "_rpow": rpow, "_tan": tan,
        "_sin": np.sin, "_cos": np.cos, "_atan": np.arctan, "_abs": np.abs, "_quad": quad,
    }


_LIBS = {"scalar": _scalar_lib(), "array": _array_lib()}


def _generate(exprs: Sequence[Expr], names: Sequence[str], fname: str, nodes: list, helpers: list, flavor: str):
    """Emit source for a function of ``names`` returning a tuple of values."""
    lines = []
    memo: dict = {}
    args = {n: f"a{i}" for i, n in enumerate(names)}

    def emit(e: Expr) -> str:
        if e in memo:
            return memo[e]
        if isinstance(e, Num):
            return repr(float(e.value))
        if isinstance(e, Sym):
            return args[e.name]
        idx = len(nodes)
        nodes.append(e)
        if isinstance(e, Add):
            code = " + ".join(emit(t) for t in e.terms)
        elif isinstance(e, Mul):
            code = " * ".join(emit(f) for f in e.factors)
        elif isinstance(e, Pow):
            b = emit(e.base)
            k = e.exp
            if k.denominator == 1:
                code = f"_ipow({b}, {k.numerator}, {idx})" if k > 0 else f"_inv(_ipow({b}, {-k.numerator}, {idx}), {idx})"
            else:
                code = f"_rpow({b}, {k.numerator}, {k.denominator}, {idx})"
        elif isinstance(e, Func):
            a = emit(e.arg)
            code = {
                "exp": f"_exp({a}, {idx})",
                "ln": f"_ln({a}, {idx})",
                "sin": f"_sin({a})",
                "cos": f"_cos({a})",
                "tan": f"_tan({a}, {idx})",
                "arctan": f"_atan({a})",
                "abs": f"_abs({a})",
            }[e.name]
        elif isinstance(e, Integral):
            inner_names = list(names) + [e.var]
            hname = f"_h{len(helpers)}"
            helpers.append(None)
            src = _generate([e.body], inner_names, hname, nodes, helpers, flavor)
            helpers[int(hname[2:])] = src
            packed = "".join(f"{args[n]}, " for n in names)
            code = f"_quad(lambda *z: {hname}(*z)[0], ({packed}))"
        else:
            raise TypeError(type(e))
        var = f"v{idx}"
        lines.append(f"    {var} = {code}")
        memo[e] = var
        return var

    outs = [emit(e) for e in exprs]
    head = f"def {fname}({', '.join(args[n] for n in names)}):"
    return "\n".join([head] + lines + [f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})"])


@lru_cache(maxsize=4096)
def _compile(exprs: tuple, names: tuple, flavor: str):
    nodes: list = []
    helpers: list = []
    src = _generate(list(exprs), list(names), "_f", nodes, helpers, flavor)
    ns = dict(_LIBS[flavor])
    for h in helpers:
        exec(h, ns)
    exec(src, ns)
    fn = ns["_f"]

    def run(*args):
        try:
            return fn(*args)
        except _Fail as err:
            raise DomainError(err.message, nodes[err.idx]) from None
        except ZeroDivisionError:
            raise DomainError("division by zero") from None

    return run


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str], flavor: str = "scalar"):
    """Compile ``exprs`` into ``f(*values) -> tuple`` over ``names``."""
    missing = set().union(*(e.free_symbols for e in exprs)) - set(names) if exprs else set()
    if missing:
        raise UnboundSymbolError(missing)
    return _compile(tuple(exprs), tuple(names), flavor)


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` in IEEE double precision."""
    names = tuple(sorted(e.free_symbols))
    missing = [n for n in names if n not in bindings]
    if missing:
        raise UnboundSymbolError(missing)
    fn = _compile((e,), names, "scalar")
    return float(fn(*(float(bindings[n]) for n in names))[0])


def evaluate_many(exprs: Sequence[Expr], bindings: Mapping[str, float]) -> list:
    names = tuple(sorted(set().union(*(e.free_symbols for e in exprs)))) if exprs else ()
    missing = [n for n in names if n not in bindings]
    if missing:
        raise UnboundSymbolError(missing)
    fn = _compile(tuple(exprs), names, "scalar")
    return [float(v) for v in fn(*(float(bindings[n]) for n in names))]


def lambdify(exprs: Sequence[Expr], names: Sequence[str]):
    """Vectorised evaluator: ``f(*arrays) -> ndarray`` of shape
    ``(len(exprs),) + broadcast shape``."""
    fn = compile_exprs(exprs, names, "array")

    def call(*arrays):
        vals = fn(*arrays)
        shape = np.broadcast_shapes(*(np.shape(a) for a in arrays)) if arrays else ()
        out = np.empty((len(vals),) + shape)
        for i, v in enumerate(vals):
            out[i] = v
        return out

    return call
