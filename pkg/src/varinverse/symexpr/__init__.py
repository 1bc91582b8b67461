"""Expression DSL: parsing, differentiation, simplification, substitution
and numeric evaluation."""
from .calculus import (
    DEFAULT_BOX, ExhaustedSamplesError, diff, equiv_random, gradient,
    max_abs_difference, rationalize, sample_box, sample_points,
)
from .core import (
    FUNCTIONS, ONE, ZERO, Add, Expr, Func, Integral, Mul, Num, Pow, Sym,
    add, as_expr, div, func, has_integral, integral01, is_num, mul, neg, num,
    power, scale_args, simplify, sub, substitute, sym,
)
from .env import TIME, EnvError, SymbolEnv
from .evaluate import (
    DomainError, UnboundSymbolError, compile_exprs, evaluate, evaluate_many,
    gauss_legendre01, lambdify,
)
from .integrate import as_rational, integrate01, poly_coeffs
from .parser import ParseError, UnknownSymbolError, parse
from .printer import to_string

__all__ = [
    "DEFAULT_BOX", "ExhaustedSamplesError", "diff", "equiv_random", "gradient",
    "max_abs_difference", "rationalize", "sample_box", "sample_points",
    "FUNCTIONS", "ONE", "ZERO", "Add", "Expr", "Func", "Integral", "Mul", "Num",
    "Pow", "Sym", "add", "as_expr", "div", "func", "has_integral", "integral01",
    "is_num", "mul", "neg", "num", "power", "scale_args", "simplify", "sub",
    "substitute", "sym", "TIME", "EnvError", "SymbolEnv", "DomainError",
    "UnboundSymbolError", "compile_exprs", "evaluate", "evaluate_many",
    "gauss_legendre01", "lambdify", "as_rational", "integrate01", "poly_coeffs",
    "ParseError", "UnknownSymbolError", "parse", "to_string",
]
