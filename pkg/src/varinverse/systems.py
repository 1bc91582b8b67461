"""ODE system containers and their JSON schema."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .symexpr import (
    ZERO, Expr, SymbolEnv, diff, is_num, lambdify, parse, simplify, substitute, sym,
)


class SchemaError(ValueError):
    """A system, multiplier or seed document does not match its schema."""


@dataclass(frozen=True)
class SecondOrderSystem:
    """``q''^i = f^i(t, q, q')``."""

    env: SymbolEnv
    forces: tuple

    def __post_init__(self):
        object.__setattr__(self, "forces", tuple(simplify(f) for f in self.forces))
        if self.env.n < 1:
            raise SchemaError("need at least one coordinate")
        if len(self.forces) != self.env.n:
            raise SchemaError(f"expected {self.env.n} forces, got {len(self.forces)}")
        allowed = self.env.symbols() - set(self.env.extra)
        for f in self.forces:
            bad = f.free_symbols - allowed
            if bad:
                raise SchemaError(f"force mentions undeclared symbols {sorted(bad)}")

    @classmethod
    def from_strings(cls, coordinates: Sequence[str], forces: Mapping[str, str] | Sequence[str], parameters=None):
        env = SymbolEnv(tuple(coordinates), parameters or {})
        if isinstance(forces, Mapping):
            missing = set(env.coordinates) - set(forces)
            if missing:
                raise SchemaError(f"no force given for {sorted(missing)}")
            texts = [forces[c] for c in env.coordinates]
        else:
            texts = list(forces)
        return cls(env, tuple(parse(s, env) for s in texts))

    @property
    def n(self) -> int:
        return self.env.n

    @property
    def params(self) -> dict:
        return dict(self.env.parameters)

    def velocity_jacobian(self) -> list:
        """``F[i][j] = d f^i / d q'^j``."""
        return [[diff(f, v) for v in self.env.velocities] for f in self.forces]

    def coordinate_jacobian(self) -> list:
        return [[diff(f, c) for c in self.env.coordinates] for f in self.forces]


@dataclass(frozen=True)
class FirstOrderSystem:
    """``x'^a = f^a(t, x)`` with an even number of coordinates."""

    env: SymbolEnv
    field: tuple

    def __post_init__(self):
        object.__setattr__(self, "field", tuple(simplify(f) for f in self.field))
        N = self.env.n
        if N < 2 or N % 2:
            raise SchemaError(f"first-order systems need an even dimension >= 2, got {N}")
        if len(self.field) != N:
            raise SchemaError(f"expected {N} field components, got {len(self.field)}")
        allowed = {"t"} | set(self.env.coordinates) | set(self.env.parameters)
        for f in self.field:
            bad = f.free_symbols - allowed
            if bad:
                raise SchemaError(f"velocity field mentions {sorted(bad)}")

    @classmethod
    def from_strings(cls, coordinates, field, parameters=None):
        env = SymbolEnv(tuple(coordinates), parameters or {})
        texts = [field[c] for c in env.coordinates] if isinstance(field, Mapping) else list(field)
        return cls(env, tuple(parse(s, env) for s in texts))

    @property
    def N(self) -> int:
        return self.env.n

    @property
    def params(self) -> dict:
        return dict(self.env.parameters)

    def jacobian(self) -> list:
        return [[diff(f, c) for c in self.env.coordinates] for f in self.field]

    def vector_field(self):
        """Vectorised ``f(t, X) -> X'`` for ``X`` of shape ``(P, N)``."""
        names = ("t",) + self.env.coordinates
        fn = _bind(self.field, names, self.params)

        def call(t, X):
            X = np.atleast_2d(X)
            return fn(t, *X.T).T

        return call

    def jacobian_field(self):
        """Vectorised ``Df(t, X) -> (P, N, N)``."""
        names = ("t",) + self.env.coordinates
        flat = [e for row in self.jacobian() for e in row]
        fn = _bind(flat, names, self.params)
        N = self.N

        def call(t, X):
            X = np.atleast_2d(X)
            vals = fn(t, *X.T)  # (N*N, P)
            return np.moveaxis(vals.reshape(N, N, -1), -1, 0)

        return call

    def linear_parts(self):
        """``(A, j)`` when the field is affine in ``x``, else None."""
        coords = self.env.coordinates
        A = self.jacobian()
        for row in A:
            for a in row:
                if a.free_symbols & set(coords):
                    return None
        zero = {c: ZERO for c in coords}
        j = [simplify(substitute(f, zero)) for f in self.field]
        return LinearSystem(A=tuple(tuple(r) for r in A), j=tuple(j), parameters=self.params, coordinates=coords)


@dataclass(frozen=True)
class LinearSystem:
    """``x' = A(t) x + j(t)``."""

    A: tuple
    j: tuple
    parameters: Mapping[str, float]
    coordinates: tuple = ()

    def __post_init__(self):
        N = len(self.A)
        if N < 2 or N % 2:
            raise SchemaError(f"linear systems need an even dimension >= 2, got {N}")
        if any(len(r) != N for r in self.A) or len(self.j) != N:
            raise SchemaError("A must be square and match j")
        object.__setattr__(self, "parameters", dict(self.parameters))
        if not self.coordinates:
            object.__setattr__(self, "coordinates", tuple(f"x{i + 1}" for i in range(N)))
        for e in list(self.j) + [a for r in self.A for a in r]:
            bad = e.free_symbols - {"t"} - set(self.parameters)
            if bad:
                raise SchemaError(f"A and j may depend on t and parameters only, found {sorted(bad)}")

    @property
    def N(self) -> int:
        return len(self.A)

    def matrices(self):
        """Return ``(A(t), j(t))`` evaluators producing numpy arrays."""
        N = self.N
        fa = _bind([a for r in self.A for a in r], ("t",), self.parameters)
        fj = _bind(list(self.j), ("t",), self.parameters)
        return (lambda t: fa(t).reshape(N, N)), (lambda t: fj(t).reshape(N))

    def as_first_order(self) -> FirstOrderSystem:
        env = SymbolEnv(self.coordinates, self.parameters)
        xs = [sym(c) for c in self.coordinates]
        field = []
        for row, jj in zip(self.A, self.j):
            terms = [a * x for a, x in zip(row, xs)]
            total = jj
            for term in terms:
                total = total + term
            field.append(total)
        return FirstOrderSystem(env, tuple(field))


def _bind(exprs, names, params):
    """Lambdify over ``names`` with parameters substituted as constants."""
    pnames = tuple(sorted(params))
    fn = lambdify(list(exprs), tuple(names) + pnames)
    pvals = tuple(float(params[p]) for p in pnames)

    def call(*args):
        return fn(*args, *pvals)

    return call


def reduce_to_first_order(sys: SecondOrderSystem, momentum_prefix: str = "p") -> FirstOrderSystem:
    """Introduce ``p_i = q'^i``: state ``(q_1..q_n, p_1..p_n)``."""
    coords = sys.env.coordinates
    moms = tuple(f"{momentum_prefix}{c}" for c in coords)
    while set(moms) & (set(coords) | set(sys.env.parameters) | {"t"}) or any(
        m.startswith("d") and m[1:] in coords + moms for m in moms
    ):
        momentum_prefix += "p"
        moms = tuple(f"{momentum_prefix}{c}" for c in coords)
    env = SymbolEnv(coords + moms, sys.env.parameters)
    rename = {v: sym(m) for v, m in zip(sys.env.velocities, moms)}
    field = tuple(sym(m) for m in moms) + tuple(substitute(f, rename) for f in sys.forces)
    return FirstOrderSystem(env, field)


def is_zero(e: Expr) -> bool:
    return is_num(simplify(e), 0)


# JSON documents ---------------------------------------------------------

def _expect(doc, key, kind):
    if key not in doc:
        raise SchemaError(f"missing key {key!r}")
    if not isinstance(doc[key], kind):
        raise SchemaError(f"{key!r} has the wrong type")
    return doc[key]


def system_from_json(doc: Mapping):
    """Build a system from a system-file document."""
    if not isinstance(doc, Mapping):
        raise SchemaError("system document must be an object")
    kind = _expect(doc, "kind", str)
    params = doc.get("parameters", {})
    if not isinstance(params, Mapping) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
        raise SchemaError("parameters must map names to numbers")
    if kind == "second_order":
        coords = _expect(doc, "coordinates", list)
        return SecondOrderSystem.from_strings(coords, _expect(doc, "forces", Mapping), params)
    if kind == "first_order":
        coords = _expect(doc, "coordinates", list)
        return FirstOrderSystem.from_strings(coords, _expect(doc, "velocity_field", Mapping), params)
    if kind == "linear_first_order":
        A = _expect(doc, "A", list)
        j = _expect(doc, "j", list)
        coords = tuple(doc.get("coordinates", ()))
        env = SymbolEnv(coords or tuple(f"x{i + 1}" for i in range(len(A))), params)
        try:
            Ax = tuple(tuple(parse(str(a), env) for a in row) for row in A)
            jx = tuple(parse(str(v), env) for v in j)
        except TypeError:
            raise SchemaError("A rows must be lists") from None
        return LinearSystem(Ax, jx, params, env.coordinates)
    raise SchemaError(f"unknown system kind {kind!r}")


def multiplier_from_json(doc: Mapping, env: SymbolEnv) -> list:
    entries = _expect(doc, "entries", list)
    n = env.n
    if len(entries) != n or any(not isinstance(r, list) or len(r) != n for r in entries):
        raise SchemaError(f"multiplier must be a {n}x{n} matrix")
    return [[parse(str(e), env) for e in row] for row in entries]


def omega0_from_json(doc: Mapping, N: int) -> np.ndarray:
    rows = _expect(doc, "omega0", list)
    try:
        m = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("omega0 must be a numeric matrix") from None
    if m.shape != (N, N):
        raise SchemaError(f"omega0 must be {N}x{N}")
    return m
