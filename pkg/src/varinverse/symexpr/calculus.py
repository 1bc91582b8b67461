from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .core import (
    ONE, ZERO, Add, Expr, Func, Integral, Mul, Num, Pow, Sym,
    add, func, integral01, mul, neg, power,
)
from .evaluate import DomainError, compile_exprs

DEFAULT_BOX = (0.1, 2.0)


def diff(e: Expr, s: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to symbol ``s``."""
    memo: dict = {}

    def d(x: Expr) -> Expr:
        if s not in x.free_symbols:
            return ZERO
        r = memo.get(x)
        if r is not None:
            return r
        if isinstance(x, Sym):
            r = ONE
        elif isinstance(x, Add):
            r = add(*(d(t) for t in x.terms))
        elif isinstance(x, Mul):
            parts = []
            fs = x.factors
            for i, f in enumerate(fs):
                df = d(f)
                if df != ZERO:
                    parts.append(mul(*fs[:i], df, *fs[i + 1:]))
            r = add(*parts)
        elif isinstance(x, Pow):
            r = mul(Num(x.exp), power(x.base, x.exp - 1), d(x.base))
        elif isinstance(x, Func):
            a = x.arg
            da = d(a)
            if x.name == "exp":
                r = mul(x, da)
            elif x.name == "ln":
                r = mul(da, power(a, -1))
            elif x.name == "sin":
                r = mul(func("cos", a), da)
            elif x.name == "cos":
                r = neg(mul(func("sin", a), da))
            elif x.name == "tan":
                r = mul(add(ONE, power(x, 2)), da)
            elif x.name == "arctan":
                r = mul(da, power(add(ONE, power(a, 2)), -1))
            elif x.name == "abs":
                r = mul(a, power(x, -1), da)
            else:
                raise ValueError(x.name)
        elif isinstance(x, Integral):
            if x.var == s:
                raise ValueError(f"cannot differentiate with respect to bound variable {s!r}")
            r = integral01(x.var, d(x.body))
        else:
            r = ZERO
        memo[x] = r
        return r

    return d(e)


def gradient(e: Expr, names: Sequence[str]) -> list:
    return [diff(e, n) for n in names]


def sample_box(rng: np.random.Generator, size, box=DEFAULT_BOX) -> np.ndarray:
    """Uniform draws on [-hi, -lo] U [lo, hi]."""
    lo, hi = box
    mag = rng.uniform(lo, hi, size=size)
    sign = np.where(rng.random(size=size) < 0.5, -1.0, 1.0)
    return sign * mag


class ExhaustedSamplesError(RuntimeError):
    pass


def sample_points(
    exprs: Sequence[Expr],
    params: Mapping[str, float],
    count: int,
    seed: int = 0,
    box=DEFAULT_BOX,
    fixed: Mapping[str, float] | None = None,
    max_factor: int = 10,
):
    """Yield ``(bindings, values)`` for ``count`` random points where every
    expression evaluates; points raising domain errors are redrawn, at most
    ``max_factor * count`` extra draws."""
    fixed = dict(fixed or {})
    names = sorted(set().union(*(e.free_symbols for e in exprs)) if exprs else set())
    free = [n for n in names if n not in params and n not in fixed]
    fn = compile_exprs(exprs, names)
    rng = np.random.default_rng(seed)
    out = []
    budget = max_factor * count
    while len(out) < count:
        draw = sample_box(rng, len(free), box)
        bindings = dict(params)
        bindings.update(fixed)
        bindings.update(zip(free, (float(v) for v in draw)))
        try:
            vals = fn(*(float(bindings[n]) for n in names))
        except (DomainError, OverflowError):
            budget -= 1
            if budget < 0:
                raise ExhaustedSamplesError(
                    f"no common domain found on box {box} after {max_factor * count} redraws"
                ) from None
            continue
        out.append((bindings, [float(v) for v in vals]))
    return out


def equiv_random(
    a: Expr,
    b: Expr,
    params: Mapping[str, float] | None = None,
    trials: int = 64,
    tol: float = 1e-9,
    seed: int = 0,
    box=DEFAULT_BOX,
) -> bool:
    """Probabilistic equality: ``|a - b| < tol`` at ``trials`` random points
    of the sampling box. Parameters keep their bound values."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pts = sample_points([a, b], params or {}, trials, seed=seed, box=box)
    return all(abs(va - vb) < tol for _, (va, vb) in pts)


def max_abs_difference(a: Expr, b: Expr, params=None, trials=64, seed=0, box=DEFAULT_BOX):
    """Largest ``|a - b|`` over the sample and the point where it occurs."""
    pts = sample_points([a, b], params or {}, trials, seed=seed, box=box)
    worst = max(pts, key=lambda p: abs(p[1][0] - p[1][1]))
    return abs(worst[1][0] - worst[1][1]), worst[0]


def rationalize(x: float, max_den: int = 10**6) -> Fraction:
    return Fraction(x).limit_denominator(max_den)
