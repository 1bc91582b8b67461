"""Immutable expression trees with canonicalizing constructors.

Every node is built through :func:`add`, :func:`mul`, :func:`power`,
:func:`func` or :func:`integral01`, which keep trees in a canonical form:
flattened sums and products, sorted operands, numeric coefficients
collected, like terms and like bases merged. Numeric literals are exact
:class:`fractions.Fraction` values.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Union

FUNCTIONS = ("exp", "ln", "sin", "cos", "tan", "arctan", "sqrt", "abs")

Number = Union[int, Fraction]


class Expr:
    __slots__ = ("_hash", "_key", "_free")

    # subclasses set _args() and _rank
    _rank = 0

    def _args(self) -> tuple:
        raise NotImplementedError

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__, self._args()))
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._args() == other._args()

    def __ne__(self, other):
        return not self == other

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    @property
    def sort_key(self) -> tuple:
        try:
            return self._key
        except AttributeError:
            k = self._make_key()
            object.__setattr__(self, "_key", k)
            return k

    @property
    def free_symbols(self) -> frozenset:
        try:
            return self._free
        except AttributeError:
            fs = self._make_free()
            object.__setattr__(self, "_free", fs)
            return fs

    def _make_free(self) -> frozenset:
        out: frozenset = frozenset()
        for a in self._children():
            out = out | a.free_symbols
        return out

    def _children(self) -> tuple:
        return ()

    # arithmetic sugar, all routed through the canonical constructors
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, Fraction(k))

    def __repr__(self):
        from .printer import to_string

        return f"Expr({to_string(self)!r})"

    def __str__(self):
        from .printer import to_string

        return to_string(self)


def _init(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)


class Num(Expr):
    __slots__ = ("value",)
    _rank = 0

    def __init__(self, value: Number):
        _init(self, value=Fraction(value))

    def _args(self):
        return (self.value,)

    def _make_key(self):
        return (0, self.value)


class Sym(Expr):
    __slots__ = ("name",)
    _rank = 1

    def __init__(self, name: str):
        _init(self, name=name)

    def _args(self):
        return (self.name,)

    def _make_key(self):
        return (1, self.name)

    def _make_free(self):
        return frozenset((self.name,))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        _init(self, terms=terms)

    def _args(self):
        return self.terms

    def _children(self):
        return self.terms

    def _make_key(self):
        return (5, len(self.terms), tuple(t.sort_key for t in self.terms))


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        _init(self, factors=factors)

    def _args(self):
        return self.factors

    def _children(self):
        return self.factors

    def _make_key(self):
        return (4, len(self.factors), tuple(f.sort_key for f in self.factors))


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Fraction):
        _init(self, base=base, exp=Fraction(exp))

    def _args(self):
        return (self.base, self.exp)

    def _children(self):
        return (self.base,)

    def _make_key(self):
        # powers sort next to their base so x and x^2 stay adjacent
        return self.base.sort_key + ((9, self.exp),)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        _init(self, name=name, arg=arg)

    def _args(self):
        return (self.name, self.arg)

    def _children(self):
        return (self.arg,)

    def _make_key(self):
        return (3, self.name, self.arg.sort_key)


class Integral(Expr):
    """Definite integral of ``body`` over ``var`` in [0, 1].

    Evaluated numerically by Gauss-Legendre quadrature; differentiation
    passes under the integral sign.
    """

    __slots__ = ("var", "body")

    def __init__(self, var: str, body: Expr):
        _init(self, var=var, body=body)

    def _args(self):
        return (self.var, self.body)

    def _children(self):
        return (self.body,)

    def _make_free(self):
        return self.body.free_symbols - {self.var}

    def _make_key(self):
        return (6, self.var, self.body.sort_key)


ZERO = Num(0)
ONE = Num(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Num(x)
    if isinstance(x, float):
        return Num(Fraction(x))
    if isinstance(x, str):
        return Sym(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def is_num(e: Expr, value=None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def _split_coeff(term: Expr) -> tuple[Fraction, Expr]:
    if isinstance(term, Num):
        return term.value, ONE
    if isinstance(term, Mul) and isinstance(term.factors[0], Num):
        rest = term.factors[1:]
        return term.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), term


def _with_coeff(c: Fraction, m: Expr) -> Expr:
    if c == 1:
        return m
    if is_num(m, 1):
        return Num(c)
    if isinstance(m, Mul):
        return Mul((Num(c),) + m.factors)
    return Mul((Num(c), m))


def add(*args: Expr) -> Expr:
    const = Fraction(0)
    coeffs: dict = {}
    order = []
    stack = list(args)
    flat = []
    while stack:
        a = stack.pop()
        if isinstance(a, Add):
            stack.extend(a.terms)
        else:
            flat.append(a)
    for a in flat:
        if isinstance(a, Num):
            const += a.value
            continue
        c, m = _split_coeff(a)
        if m in coeffs:
            coeffs[m] += c
        else:
            coeffs[m] = c
            order.append(m)
    terms = [_with_coeff(coeffs[m], m) for m in order if coeffs[m] != 0]
    terms.sort(key=lambda e: e.sort_key)
    if const != 0:
        terms.insert(0, Num(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def mul(*args: Expr) -> Expr:
    coeff = Fraction(1)
    bases: dict = {}
    order = []
    stack = list(args)
    while stack:
        a = stack.pop()
        if isinstance(a, Mul):
            stack.extend(a.factors)
            continue
        if isinstance(a, Num):
            if a.value == 0:
                return ZERO
            coeff *= a.value
            continue
        if isinstance(a, Pow):
            b, k = a.base, a.exp
        else:
            b, k = a, Fraction(1)
        if b in bases:
            bases[b] += k
        else:
            bases[b] = k
            order.append(b)
    factors = []
    regroup = False
    for b in order:
        k = bases[b]
        if k == 0:
            continue
        p = power(b, k)
        if isinstance(p, (Num, Mul)):
            regroup = True
        factors.append(p)
    if regroup:
        return mul(Num(coeff), *factors)
    factors.sort(key=lambda e: e.sort_key)
    if coeff != 1:
        factors.insert(0, Num(coeff))
    if not factors:
        return Num(coeff)
    if len(factors) == 1:
        return factors[0]
    return Mul(tuple(factors))


def neg(e: Expr) -> Expr:
    return mul(Num(-1), e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def div(a: Expr, b: Expr) -> Expr:
    return mul(a, power(b, -1))


def _exact_root(x: Fraction, q: int):
    """Exact q-th root of a non-negative rational, or None."""
    if x < 0:
        return None

    def iroot(n: int):
        r = round(n ** (1.0 / q))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c**q == n:
                return c
        return None

    a, b = iroot(x.numerator), iroot(x.denominator)
    if a is None or b is None:
        return None
    return Fraction(a, b)


def power(base: Expr, k) -> Expr:
    k = Fraction(k)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Num):
        v = base.value
        if k.denominator == 1:
            if v == 0 and k < 0:
                return Pow(base, k)
            return Num(v ** k.numerator)
        if v > 0:
            r = _exact_root(v, k.denominator)
            if r is not None:
                return Num(r ** k.numerator)
        if v == 0 and k > 0:
            return ZERO
        return Pow(base, k)
    if isinstance(base, Pow) and k.denominator == 1:
        return power(base.base, base.exp * k)
    if isinstance(base, Mul) and k.denominator == 1:
        return mul(*(power(f, k) for f in base.factors))
    return Pow(base, k)


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if name == "sqrt":
        return power(arg, Fraction(1, 2))
    if isinstance(arg, Num):
        v = arg.value
        if v == 0 and name in ("sin", "tan", "arctan", "abs"):
            return ZERO
        if v == 0 and name in ("exp", "cos"):
            return ONE
        if v == 1 and name == "ln":
            return ZERO
        if name == "abs":
            return Num(abs(v))
    if name == "ln" and isinstance(arg, Func) and arg.name == "exp":
        return arg.arg
    if name == "abs" and isinstance(arg, Func) and arg.name in ("abs", "exp"):
        return arg
    return Func(name, arg)


def integral01(var: str, body: Expr) -> Expr:
    if var not in body.free_symbols:
        return body
    if isinstance(body, Add):
        return add(*(integral01(var, t) for t in body.terms))
    c, m = _split_coeff(body)
    if c != 1:
        return mul(Num(c), integral01(var, m))
    return Integral(var, body)


def sym(name: str) -> Sym:
    return Sym(name)


def num(v) -> Num:
    return Num(Fraction(v))


def rebuild(e: Expr, fn) -> Expr:
    """Rebuild ``e`` bottom-up, mapping each node through ``fn`` after its
    children are rebuilt. Shared subtrees are visited once."""
    memo: dict = {}

    def go(x: Expr) -> Expr:
        r = memo.get(x)
        if r is not None:
            return r
        if isinstance(x, Add):
            y = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            y = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Pow):
            y = power(go(x.base), x.exp)
        elif isinstance(x, Func):
            y = func(x.name, go(x.arg))
        elif isinstance(x, Integral):
            y = integral01(x.var, go(x.body))
        else:
            y = x
        y = fn(y)
        memo[x] = y
        return y

    return go(e)


def simplify(e: Expr) -> Expr:
    """Canonical form: constant folding, flattening, coefficient and
    like-term collection. Idempotent."""
    return rebuild(e, lambda y: y)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    if not (e.free_symbols & mapping.keys()):
        return e

    def fn(y):
        if isinstance(y, Sym) and y.name in mapping:
            return mapping[y.name]
        return y

    if any(isinstance(n, Integral) for n in walk(e)):
        return _substitute_scoped(e, mapping)
    return rebuild(e, fn)


def _substitute_scoped(e: Expr, mapping: dict) -> Expr:
    if not (e.free_symbols & mapping.keys()):
        return e
    if isinstance(e, Sym):
        return mapping.get(e.name, e)
    if isinstance(e, Add):
        return add(*(_substitute_scoped(t, mapping) for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(_substitute_scoped(f, mapping) for f in e.factors))
    if isinstance(e, Pow):
        return power(_substitute_scoped(e.base, mapping), e.exp)
    if isinstance(e, Func):
        return func(e.name, _substitute_scoped(e.arg, mapping))
    if isinstance(e, Integral):
        inner = {k: v for k, v in mapping.items() if k != e.var}
        return integral01(e.var, _substitute_scoped(e.body, inner))
    return e


def walk(e: Expr) -> Iterable[Expr]:
    seen = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        yield x
        stack.extend(x._children())


def scale_args(e: Expr, names: Iterable[str], factor: Expr) -> Expr:
    """Replace every symbol in ``names`` by ``factor * symbol``."""
    names = list(names)
    factor = as_expr(factor)
    clash = factor.free_symbols & set(names)
    if clash:
        raise ValueError(f"scale factor mentions scaled symbols {sorted(clash)}")
    return substitute(e, {n: mul(factor, Sym(n)) for n in names})


def has_integral(e: Expr) -> bool:
    return any(isinstance(n, Integral) for n in walk(e))
