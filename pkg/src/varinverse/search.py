"""Multiplier search over restricted ansatz classes.

Unknown entries enter the conditions linearly, so each condition becomes a
stack of linear rows sampled at random points. Entries that vanish on the
whole null space are forced to zero; the sequence of such forcings is what an
:class:`Obstruction` reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .symexpr import (
    ZERO, Expr, add, diff, evaluate_many, func, integrate01, is_num, mul,
    neg, num, sample_points, scale_args, simplify, sym,
)
from .systems import SecondOrderSystem
from .variational2 import _matmul, b_matrix, check_multiplier

ANSATZE = ("constant", "scaled_time", "diagonal_functions")
_NULL_TOL = 1e-10


class UnsupportedAnsatzError(ValueError):
    """The requested ansatz class does not apply to this system."""


@dataclass
class Obstruction:
    """Ordered chain of forced zeros ending in a degenerate multiplier."""

    ansatz: str
    steps: list = field(default_factory=list)  # (condition label, consequence)
    terminal: str = "det=0"

    def __str__(self) -> str:
        parts = [f"{cond}→{what}" for cond, what in self.steps]
        return "; ".join(parts + [self.terminal])

    def to_json(self) -> dict:
        return {
            "ansatz": self.ansatz,
            "chain": [{"condition": c, "consequence": e} for c, e in self.steps],
            "terminal": self.terminal,
            "text": str(self),
        }


@dataclass
class SearchResult:
    """A multiplier found by the search, with the null-space basis it came from."""

    ansatz: str
    multiplier: list
    basis: list = field(default_factory=list)


def _unknowns(n: int, diagonal: bool = False):
    names, labels = {}, {}
    for i in range(n):
        for j in range(i, n):
            if diagonal and i != j:
                continue
            names[(i, j)] = f"__h{i + 1}{j + 1}"
            labels[(i, j)] = f"h{i + 1}{j + 1}"
    return names, labels


def _symbolic_h(n, names):
    return [[sym(names[(min(i, j), max(i, j))]) if (min(i, j), max(i, j)) in names else ZERO for j in range(n)] for i in range(n)]


def _eq19_rows(sys, h):
    hB = _matmul(h, b_matrix(sys))
    n = sys.n
    return [add(hB[i][k], neg(hB[k][i])) for i in range(n) for k in range(i + 1, n)]


def constant_algebraic_relations(sys) -> tuple:
    """Entries of ``hB - (hB)^T`` for a constant symmetric ``h`` of symbols ``h<i><j>``.

    Returns ``(relations, symbols)``; relations that vanish identically are dropped.
    """
    names, _ = _unknowns(sys.n)
    labels = {v: f"h{k[0] + 1}{k[1] + 1}" for k, v in names.items()}
    h = _symbolic_h(sys.n, {k: labels[v] for k, v in names.items()})
    rows = [simplify(r) for r in _eq19_rows(sys, h)]
    return [r for r in rows if not is_num(r, 0)], sorted(labels.values())


def _eq11_algebraic(sys, h, F):
    """``1/2 (hF + F^T h)_ik`` components."""
    hF = _matmul(h, F)
    n = sys.n
    half = num(Fraction(1, 2))
    return {(i, k): mul(half, add(hF[i][k], hF[k][i])) for i in range(n) for k in range(i, n)}


def _coefficients(rows, keys, names):
    return [[diff(r, names[key]) for key in keys] for r in rows]


class _Linear:
    """Sampled linear constraints on the unknown entries."""

    def __init__(self, sys, keys, names, samples, seed, pointwise):
        self.sys, self.keys, self.names = sys, keys, names
        self.samples, self.seed, self.pointwise = samples, seed, pointwise
        self.blocks = []  # per constraint: array (points, rows, unknowns)
        # one shared set of state points; row coefficients are polynomial in
        # the entries of F and B, so they are defined wherever those are
        env = sys.env
        state = [sym(x) for x in ("t",) + env.coordinates + env.velocities]
        domain = [e for row in sys.velocity_jacobian() + b_matrix(sys) for e in row]
        self.points = [b for b, _ in sample_points(state + domain, sys.params, samples, seed=seed)]

    def add_rows(self, rows):
        rows = [r for r in rows if not is_num(r, 0)]
        if not rows:
            return
        coefs = _coefficients(rows, self.keys, self.names)
        flat = [c for row in coefs for c in row]
        vals = np.array([evaluate_many(flat, b) for b in self.points], dtype=float)
        self.blocks.append(vals.reshape(len(self.points), len(rows), len(self.keys)))

    def forced(self) -> set:
        """Indices of unknowns that vanish on every admissible solution."""
        m = len(self.keys)
        if not self.blocks:
            return set()
        stack = np.concatenate(self.blocks, axis=1)
        if self.pointwise:
            per_point = [_forced_zero(stack[p]) for p in range(stack.shape[0])]
            return set.intersection(*per_point)
        return _forced_zero(stack.reshape(-1, m))

    def null_basis(self) -> np.ndarray:
        m = len(self.keys)
        if not self.blocks:
            return np.eye(m)
        stack = np.concatenate(self.blocks, axis=1).reshape(-1, m)
        return _null(stack)


def _null(M: np.ndarray) -> np.ndarray:
    m = M.shape[1]
    if M.size == 0:
        return np.eye(m)
    scale = max(1.0, np.abs(M).max())
    _, s, vt = np.linalg.svd(M / scale)
    rank = int(np.sum(s > _NULL_TOL))
    return vt[rank:]


def _forced_zero(M: np.ndarray) -> set:
    N = _null(M)
    if N.shape[0] == 0:
        return set(range(M.shape[1]))
    return {u for u in range(M.shape[1]) if np.abs(N[:, u]).max() < 1e-8}


def _closest_to_identity(N: np.ndarray, keys) -> np.ndarray:
    """Weighted Frobenius projection of the identity onto ``span(N)``."""
    w = np.array([1.0 if i == j else 2.0 for i, j in keys])
    e = np.array([1.0 if i == j else 0.0 for i, j in keys])
    G = (N * w) @ N.T
    c = np.linalg.solve(G, (N * w) @ e)
    x = N.T @ c
    if np.abs(x).max() < 1e-12:
        x = N[0] / np.abs(N[0]).max()
    return x


def _as_number(x: float) -> Expr:
    if abs(x) < 1e-12:
        return ZERO
    fr = Fraction(x).limit_denominator(1000)
    if abs(float(fr) - x) > 1e-9:
        fr = Fraction(x)
    return num(fr)


def _matrix_from_vector(n, keys, x) -> list:
    h = [[ZERO] * n for _ in range(n)]
    for (i, j), v in zip(keys, x):
        h[i][j] = h[j][i] = _as_number(float(v))
    return h


def _det_generic(N: np.ndarray, n, keys, seed) -> float:
    if N.shape[0] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = N.T @ rng.standard_normal(N.shape[0])
    H = np.zeros((n, n))
    for (i, j), v in zip(keys, x):
        H[i, j] = H[j, i] = v
    return abs(np.linalg.det(H)) / max(1.0, np.abs(H).max()) ** n


def _depends_on_state(e: Expr, sys: SecondOrderSystem, allow_t: bool) -> bool:
    state = set(sys.env.coordinates) | set(sys.env.velocities)
    if not allow_t:
        state.add("t")
    return bool(e.free_symbols & state)


def _time_integral(alpha: Expr) -> Expr:
    """``int_0^t alpha(s) ds`` via ``t * int_0^1 alpha(t u) du``."""
    if "t" not in alpha.free_symbols:
        return mul(alpha, sym("t"))
    return simplify(mul(sym("t"), integrate01(scale_args(alpha, ["t"], sym("__u")), "__u")))


def _propagate(sys, ob, lin, keys, labels, eq11):
    """Run Eq. 19 alone, then the algebraic Eq. 11 rows, recording forced zeros."""
    lin.add_rows(_eq19_rows(sys, _symbolic_h(sys.n, lin.names)))
    forced = lin.forced()
    for u in sorted(forced):
        ob.steps.append(("Eq19", f"{labels[keys[u]]}=0"))
    return _propagate_eq11(ob, lin, keys, labels, eq11, forced)


def search_multiplier(sys: SecondOrderSystem, ansatz: str = "constant", samples: int = 64, seed: int = 42, tol: float = 1e-8):
    """Look for a multiplier of the given ansatz class.

    Returns a :class:`SearchResult` or an :class:`Obstruction`.
    """
    if ansatz not in ANSATZE:
        raise UnsupportedAnsatzError(f"unknown ansatz {ansatz!r}; choose from {ANSATZE}")
    n = sys.n
    F = sys.velocity_jacobian()
    if ansatz == "constant" and any(_depends_on_state(e, sys, allow_t=False) for row in F for e in row):
        raise UnsupportedAnsatzError("constant ansatz needs df/dq' independent of t, q and q'")
    names, labels = _unknowns(n)
    keys = list(names)
    index = {k: u for u, k in enumerate(keys)}
    ob = Obstruction(ansatz)
    pointwise = ansatz == "diagonal_functions"
    lin = _Linear(sys, keys, names, samples, seed, pointwise)
    H = _symbolic_h(n, names)
    alg = _eq11_algebraic(sys, H, F)

    def row_spec(key):
        i, k = key
        if ansatz == "constant":
            return {"row": alg[key], "usable": lambda forced: True}
        if ansatz == "diagonal_functions" and i == k:
            # transport equation for d_i, not algebraic
            return {"row": alg[key], "usable": lambda forced: False}
        # the derivative term drops out of the (i, k) row once h_ik is forced to zero
        return {"row": alg[key], "usable": lambda forced, u=index[key]: u in forced}

    eq11 = {key: row_spec(key) for key in alg}
    if pointwise:
        # the diagonal ansatz itself removes the off-diagonal entries after Eq. 19
        lin.add_rows(_eq19_rows(sys, H))
        forced = lin.forced()
        for u in sorted(forced):
            ob.steps.append(("Eq19", f"{labels[keys[u]]}=0"))
        for (i, j), u in index.items():
            if i != j and u not in forced:
                lin.blocks.append(_pin_rows(len(keys), u, len(lin.points)))
        forced = _propagate_eq11(ob, lin, keys, labels, eq11, lin.forced(), record=lambda key: key[0] == key[1])
    else:
        forced = _propagate(sys, ob, lin, keys, labels, eq11)
    N = lin.null_basis()
    if pointwise:
        return _finish_diagonal(sys, ob, forced, keys, labels, samples, seed, tol)
    if N.shape[0] == 0 or _det_generic(N, n, keys, seed) < 1e-9:
        return ob
    if ansatz == "constant":
        h = _matrix_from_vector(n, keys, _closest_to_identity(N, keys))
        return _validated(sys, ob, h, N, keys, samples, seed, tol)
    # scaled_time
    alpha = F[0][0]
    scalar = all(
        (is_num(simplify(add(F[i][j], neg(alpha))), 0) if i == j else is_num(F[i][j], 0))
        for i in range(n) for j in range(n)
    )
    if not scalar or _depends_on_state(alpha, sys, allow_t=True):
        raise UnsupportedAnsatzError("scaled_time needs df/dq' = alpha(t) * identity")
    h0 = _matrix_from_vector(n, keys, _closest_to_identity(N, keys))
    c = func("exp", neg(_time_integral(alpha)))
    h = [[simplify(mul(c, e)) for e in row] for row in h0]
    return _validated(sys, ob, h, N, keys, samples, seed, tol)


def _pin_rows(m, u, points):
    row = np.zeros((points, 1, m))
    row[:, 0, u] = 1.0
    return row


def _propagate_eq11(ob, lin, keys, labels, eq11, forced, record=lambda key: True):
    changed = True
    used = set()
    while changed:
        changed = False
        for key, spec in eq11.items():
            if key in used or not spec["usable"](forced):
                continue
            used.add(key)
            lin.add_rows([spec["row"]])
            now = lin.forced()
            for u in sorted(now - forced):
                if record(keys[u]):
                    ob.steps.append(("Eq11", f"{labels[keys[u]]}=0"))
            changed = changed or now != forced
            forced = now
    return forced


def _finish_diagonal(sys, ob, forced, keys, labels, samples, seed, tol):
    n = sys.n
    F = sys.velocity_jacobian()
    if any(keys.index((i, i)) in forced for i in range(n)):
        return ob
    diag = []
    for i in range(n):
        a = F[i][i]
        if _depends_on_state(a, sys, allow_t=True):
            raise UnsupportedAnsatzError(
                f"diagonal_functions solves the diagonal transport rows only when df^{i + 1}/dq'^{i + 1} depends on t alone"
            )
        diag.append(simplify(func("exp", neg(_time_integral(a)))))
    h = [[diag[i] if i == j else ZERO for j in range(n)] for i in range(n)]
    return _validated(sys, ob, h, np.eye(len(keys)), keys, samples, seed, tol)


def _validated(sys, ob, h, N, keys, samples, seed, tol):
    report = check_multiplier(sys, h, samples=samples, tol=tol, seed=seed)
    if not report.all_passed:
        ob.steps.extend((cid, "violated") for cid in report.failed() if cid != "det")
        ob.terminal = "no candidate" if report["det"].passed else "det=0"
        return ob
    basis = [_matrix_from_vector(sys.n, keys, v / np.abs(v).max()) for v in N]
    return SearchResult(ob.ansatz, h, basis)
