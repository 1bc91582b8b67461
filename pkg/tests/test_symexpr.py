import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varinverse.symexpr import (
    DomainError, EnvError, Func, Mul, Num, ParseError, Pow, Sym, SymbolEnv,
    UnknownSymbolError, diff, equiv_random, evaluate, evaluate_many, integrate01,
    lambdify, parse, scale_args, simplify, substitute, to_string,
)


def test_parse_structure():
    e = parse("exp(-2*alpha*t)")
    assert isinstance(e, Func) and e.name == "exp"
    assert isinstance(e.arg, Mul)
    assert {f.name for f in e.arg.factors if isinstance(f, Sym)} == {"alpha", "t"}
    assert Num(-2) in e.arg.factors


def test_parse_quotient_power():
    e = parse("dx^2/2")
    assert isinstance(e, Mul)
    assert Num(0.5) in e.factors
    pw = [f for f in e.factors if isinstance(f, Pow)]
    assert pw and pw[0].exp == 2 and pw[0].base == Sym("dx")


def test_syntax_error_offset():
    with pytest.raises(ParseError) as err:
        parse("x+")
    assert err.value.offset == 2


def test_unknown_symbol_against_env():
    env = SymbolEnv(("x",), {"a": 1.0})
    parse("a*dx + x*t", env)
    with pytest.raises(UnknownSymbolError):
        parse("b*x", env)


@pytest.mark.parametrize("coords", [("x", "x"), ("t",), ("x", "dx"), ("1x",)])
def test_env_rejects(coords):
    with pytest.raises(EnvError):
        SymbolEnv(coords)


def test_rational_exponent():
    e = parse("x^(1/2)")
    assert evaluate(e, {"x": 4.0}) == pytest.approx(2.0)


def test_diff_examples():
    assert diff(parse("dx^2/2"), "dx") == parse("dx")
    assert diff(parse("exp(-2*a*t)"), "t") == parse("-2*a*exp(-2*a*t)")


def test_diff_arctan_against_finite_difference():
    e = parse("arctan(dx/dy)")
    d = diff(e, "dy")
    rng = np.random.default_rng(1)
    step = 1e-6
    for _ in range(20):
        x, y = rng.uniform(0.5, 2.0, 2) * rng.choice([-1, 1], 2)
        fd = (evaluate(e, {"dx": x, "dy": y + step}) - evaluate(e, {"dx": x, "dy": y - step})) / (2 * step)
        assert abs(evaluate(d, {"dx": x, "dy": y}) - fd) < 1e-6
    assert equiv_random(d, parse("-dx/(dx^2+dy^2)"))


def test_evaluate_examples():
    assert evaluate(parse("dx^2+dy^2"), {"dx": 3, "dy": 4}) == 25
    with pytest.raises(DomainError):
        evaluate(parse("1/dx"), {"dx": 0.0})
    assert evaluate(parse("exp(-2*alpha*t)"), {"alpha": 0.5, "t": 1}) == pytest.approx(0.367879441, abs=1e-9)


def test_equiv_random_examples():
    assert equiv_random(parse("(dx+dy)^2"), parse("dx^2+2*dx*dy+dy^2"))
    assert equiv_random(parse("sin(t)^2+cos(t)^2"), parse("1"))
    assert not equiv_random(parse("dx"), parse("dy"))


def test_substitute_and_scale():
    e = parse("x*dx + t")
    assert substitute(e, {"x": parse("2*y")}) == parse("2*y*dx + t")
    assert scale_args(parse("x^2 + y"), ["x", "y"], parse("u")) == parse("u^2*x^2 + u*y")


def test_integrate01_polynomial_and_fallback():
    assert integrate01(parse("3*u^2*x"), "u") == parse("x")
    numeric = integrate01(parse("exp(u^2)"), "u")
    assert evaluate(numeric, {}) == pytest.approx(1.4626517459071817, rel=1e-12)


def test_lambdify_matches_evaluate():
    exprs = [parse("sin(x)*dx"), parse("1"), parse("x^2 - t")]
    fn = lambdify(exprs, ("t", "x", "dx"))
    t = np.linspace(0, 1, 5)
    x = np.linspace(-1, 1, 5)
    v = np.linspace(2, 3, 5)
    out = fn(t, x, v)
    assert out.shape == (3, 5)
    for k in range(5):
        vals = evaluate_many(exprs, {"t": t[k], "x": x[k], "dx": v[k]})
        assert np.allclose(out[:, k], vals, rtol=0, atol=1e-15)


def test_evaluation_is_deterministic():
    e = parse("exp(sin(x)*dx)/(1+x^2)")
    b = {"x": 0.3, "dx": -1.7}
    assert evaluate(e, b) == evaluate(parse(to_string(e)), b)


# random trees ------------------------------------------------------------

_leaves = st.sampled_from(["x", "y", "dx", "t", "2", "3", "1/2"])


def _combine(children):
    binop = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(lambda p: f"({p[0]}{p[1]}{p[2]})")
    powr = st.tuples(children, st.sampled_from(["2", "3", "(1/2)", "(-1)"])).map(lambda p: f"({p[0]})^{p[1]}")
    fn = st.tuples(st.sampled_from(["sin", "cos", "exp"]), children).map(lambda p: f"{p[0]}({p[1]})")
    return binop | powr | fn


exprs = st.recursive(_leaves, _combine, max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_simplify_idempotent(text):
    e = parse(text)
    assert simplify(simplify(e)) == simplify(e)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_print_parse_round_trip(text):
    e = parse(text)
    assert parse(to_string(e)) == e


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_diff_matches_finite_difference(text):
    e = parse(text)
    d = diff(e, "x")
    rng = np.random.default_rng(0)
    for _ in range(3):
        b = {"x": rng.uniform(0.5, 1.5), "y": rng.uniform(0.5, 1.5), "dx": rng.uniform(0.5, 1.5), "t": rng.uniform(0.5, 1.5)}
        try:
            hi = evaluate(e, {**b, "x": b["x"] + 1e-6})
            lo = evaluate(e, {**b, "x": b["x"] - 1e-6})
            exact = evaluate(d, b)
        except DomainError:
            continue
        if not all(map(math.isfinite, (hi, lo, exact))) or max(abs(hi), abs(lo), abs(exact)) > 1e6:
            continue
        fd = (hi - lo) / 2e-6
        assert abs(fd - exact) <= 1e-4 * max(1.0, abs(exact))
