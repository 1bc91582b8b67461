"""Second-order inverse problem.

Given ``q'' = f(t, q, q')`` and a candidate multiplier ``h_ij``, evaluate the
conditions under which ``h (q'' - f)`` is an Euler-Lagrange expression and
reconstruct the Lagrangian ``L = K + l_i q'^i + l_0`` by homotopy integrals.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .reports import ConditionReport, ConditionResult, VerificationError
from .symexpr import (
    ONE, ZERO, DomainError, Expr, ExhaustedSamplesError, SymbolEnv, add, diff,
    has_integral, integrate01, mul, neg, num,
    sample_points, scale_args, simplify, sub, substitute, sym, to_string,
)
from .systems import SecondOrderSystem

log = logging.getLogger(__name__)

CONDITION_IDS = ("sym6", "grad6", "sym11", "vel13", "jacobi14", "alg19", "det")

# bound variables of the homotopy integrals; never valid user identifiers
_A, _B, _U = "__a", "__b", "__u"

Matrix = list


def d_hat(sys: SecondOrderSystem, e: Expr) -> Expr:
    """Total time derivative along the flow: d/dt + q'^j d/dq^j + f^j d/dq'^j."""
    env = sys.env
    terms = [diff(e, "t")]
    terms += [mul(sym(v), diff(e, c)) for c, v in zip(env.coordinates, env.velocities)]
    terms += [mul(f, diff(e, v)) for f, v in zip(sys.forces, env.velocities)]
    return add(*terms)


def _matmul(a: Matrix, b: Matrix) -> Matrix:
    n, m, p = len(a), len(b), len(b[0])
    return [[add(*(mul(a[i][k], b[k][j]) for k in range(m))) for j in range(p)] for i in range(n)]


def _transpose(a: Matrix) -> Matrix:
    return [list(r) for r in zip(*a)]


def b_matrix(sys: SecondOrderSystem) -> Matrix:
    """``B^i_j = 1/2 F^i_m F^m_j - D F^i_j + 2 df^i/dq^j`` with ``F = df/dq'``."""
    F = sys.velocity_jacobian()
    G = sys.coordinate_jacobian()
    FF = _matmul(F, F)
    n = sys.n
    return [
        [add(mul(num(Fraction(1, 2)), FF[i][j]), neg(d_hat(sys, F[i][j])), mul(num(2), G[i][j])) for j in range(n)]
        for i in range(n)
    ]


def antisymmetric_force_part(h: Matrix, F: Matrix) -> Matrix:
    """``A_ik = 1/2 (h_ij F^j_k - h_kj F^j_i)``."""
    hF = _matmul(h, F)
    n = len(h)
    half = num(Fraction(1, 2))
    return [[mul(half, sub(hF[i][k], hF[k][i])) for k in range(n)] for i in range(n)]


def condition_residuals(sys: SecondOrderSystem, h: Matrix) -> dict:
    """Symbolic residual expressions for every multiplier condition."""
    env = sys.env
    n = sys.n
    q, v = env.coordinates, env.velocities
    F = sys.velocity_jacobian()
    hF = _matmul(h, F)
    A = antisymmetric_force_part(h, F)
    B = b_matrix(sys)
    hB = _matmul(h, B)
    half = num(Fraction(1, 2))
    res = {cid: [] for cid in CONDITION_IDS if cid != "det"}
    for i in range(n):
        for j in range(i + 1, n):
            res["sym6"].append(sub(h[i][j], h[j][i]))
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(n):
                res["grad6"].append(sub(diff(h[i][j], v[k]), diff(h[k][j], v[i])))
    for i in range(n):
        for k in range(i, n):
            res["sym11"].append(add(d_hat(sys, h[i][k]), mul(half, add(hF[i][k], hF[k][i]))))
    for i in range(n):
        for k in range(i + 1, n):
            for l in range(n):
                res["vel13"].append(sub(sub(diff(h[k][l], q[i]), diff(h[i][l], q[k])), diff(A[i][k], v[l])))
    for i in range(n):
        for k in range(i + 1, n):
            for l in range(k + 1, n):
                res["jacobi14"].append(add(diff(A[i][k], q[l]), diff(A[k][l], q[i]), diff(A[l][i], q[k])))
    for i in range(n):
        for k in range(i + 1, n):
            res["alg19"].append(sub(hB[i][k], hB[k][i]))
    return res


def _state_witness(bindings: dict, env: SymbolEnv) -> dict:
    keep = {"t"} | set(env.coordinates) | set(env.velocities) | set(env.accelerations)
    return {k: v for k, v in bindings.items() if k in keep}


def check_multiplier(
    sys: SecondOrderSystem,
    h: Matrix,
    samples: int = 64,
    tol: float = 1e-8,
    seed: int = 42,
) -> ConditionReport:
    """Evaluate the multiplier conditions at ``samples`` seeded random points.

    Each condition passes iff its largest absolute residual is below ``tol``;
    ``det`` passes iff ``|det h| > tol`` everywhere, and reports the smallest
    ``|det h|`` seen.
    """
    n = sys.n
    if len(h) != n or any(len(r) != n for r in h):
        raise ValueError(f"multiplier must be {n}x{n}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    res = condition_residuals(sys, h)
    order = [cid for cid in CONDITION_IDS if cid != "det"]
    flat = [e for cid in order for e in res[cid]]
    entries = [e for row in h for e in row]
    exprs = flat + entries
    try:
        points = sample_points(exprs, sys.params, samples, seed=seed)
    except ExhaustedSamplesError as err:
        raise DomainError(f"multiplier undefined at every sample: {err}") from None
    results = []
    for cid in order:
        k0 = sum(len(res[c]) for c in order[: order.index(cid)])
        k1 = k0 + len(res[cid])
        worst, wpt = 0.0, points[0][0]
        for b, vals in points:
            r = max((abs(x) for x in vals[k0:k1]), default=0.0)
            if r > worst or not np.isfinite(r):
                worst, wpt = r, b
        results.append(ConditionResult(cid, bool(worst < tol), float(worst), _state_witness(wpt, sys.env)))
    mindet, dpt = np.inf, points[0][0]
    for b, vals in points:
        d = abs(float(np.linalg.det(np.array(vals[len(flat):]).reshape(n, n))))
        if d < mindet:
            mindet, dpt = d, b
    results.append(ConditionResult("det", bool(mindet > tol), float(mindet), _state_witness(dpt, sys.env)))
    return ConditionReport(results)


# reconstruction ---------------------------------------------------------

def _check_equal(a: Expr, b: Expr, params, what: str, tol: float, samples: int, seed: int, fixed=None):
    pts = sample_points([a, b], params, samples, seed=seed, fixed=fixed)
    worst = max(pts, key=lambda p: abs(p[1][0] - p[1][1]))
    r = abs(worst[1][0] - worst[1][1])
    if not r < tol:
        raise VerificationError(f"{what} check failed", worst[0], r)
    return r


def _singular_at(exprs: Sequence[Expr], params, fixed: dict, seed: int) -> bool:
    try:
        sample_points(list(exprs), params, 4, seed=seed, fixed=fixed, max_factor=2)
        return False
    except ExhaustedSamplesError:
        return True


def build_K(
    sys: SecondOrderSystem,
    h: Matrix,
    reference_velocity: Optional[Sequence] = None,
    tol: float = 1e-8,
    samples: int = 64,
    seed: int = 42,
):
    """Velocity part ``K`` with Hessian ``h`` in the velocities.

    With the velocity origin as base point the double homotopy integral is
    used directly. When ``h`` is singular at zero velocity the homotopy starts
    from ``reference_velocity`` instead, by default the first unit vector:
    sampled velocities have no zero component, so the segment from there
    stays away from the origin. Returns
    ``(K, base_velocity)``.
    """
    env = sys.env
    vel = env.velocities
    n = sys.n
    entries = [e for row in h for e in row]
    if reference_velocity is None:
        zero = {v: 0.0 for v in vel}
        reference_velocity = [1] + [0] * (n - 1) if _singular_at(entries, sys.params, zero, seed) else [0] * n
    v0 = [num(Fraction(x).limit_denominator(10**6)) for x in reference_velocity]
    vs = [sym(v) for v in vel]
    if all(x.value == 0 for x in v0):
        # K = int da qdot^j [ int db qdot1^i h_ij(t, q, b qdot1) ]_{qdot1 = a qdot}
        inner = []
        for j in range(n):
            body = add(*(mul(vs[i], scale_args(h[i][j], vel, sym(_B))) for i in range(n)))
            inner.append(integrate01(body, _B))
        outer = add(*(mul(vs[j], scale_args(inner[j], vel, sym(_A))) for j in range(n)))
        K = integrate01(outer, _A)
    else:
        # Taylor remainder about v0: K = int_0^1 (1-u) w^T h(v0 + u w) w du, w = qdot - v0
        w = [sub(vs[i], v0[i]) for i in range(n)]
        shift = {vel[i]: add(v0[i], mul(sym(_U), w[i])) for i in range(n)}
        body = add(*(mul(w[i], w[j], substitute(h[i][j], shift)) for i in range(n) for j in range(n)))
        K = integrate01(mul(sub(ONE, sym(_U)), body), _U)
    K = simplify(K)
    for i in range(n):
        for j in range(i, n):
            _check_equal(diff(diff(K, vel[i]), vel[j]), h[i][j], sys.params, f"Hessian entry ({i + 1},{j + 1}) of K", tol, samples, seed)
    return K, [float(x.value) for x in v0]


def _velocity_free(e: Expr, sys: SecondOrderSystem, v0, what: str, tol: float, samples: int, seed: int) -> Expr:
    """Verify ``e`` does not depend on velocities and pin them to ``v0``."""
    at_ref = simplify(substitute(e, {v: num(Fraction(x).limit_denominator(10**6)) for v, x in zip(sys.env.velocities, v0)}))
    if set(sys.env.velocities) & e.free_symbols:
        _check_equal(e, at_ref, sys.params, f"velocity independence of {what}", tol, samples, seed)
    return at_ref


def build_L_ik(sys: SecondOrderSystem, h: Matrix, K: Expr, reference_velocity=None, tol=1e-8, samples=64, seed=42) -> Matrix:
    """Antisymmetric, velocity-free ``L_ik = K_{q'^i q^k} - K_{q'^k q^i} + A_ik``."""
    env = sys.env
    n = sys.n
    v0 = reference_velocity or [0] * n
    A = antisymmetric_force_part(h, sys.velocity_jacobian())
    L = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for k in range(i + 1, n):
            e = add(
                diff(diff(K, env.velocities[i]), env.coordinates[k]),
                neg(diff(diff(K, env.velocities[k]), env.coordinates[i])),
                A[i][k],
            )
            e = _velocity_free(e, sys, v0, f"L_{i + 1}{k + 1}", tol, samples, seed)
            L[i][k] = e
            L[k][i] = neg(e)
    return L


def build_l(sys: SecondOrderSystem, L: Matrix, tol=1e-8, samples=64, seed=42) -> list:
    """``l_i = int_0^1 da a q^k L_ki(t, a q)`` (gauge phi = 0).

    The weight ``a`` is what makes the curl of ``l`` return ``L`` for a
    two-form; without it a constant ``L`` comes back doubled.
    """
    env = sys.env
    n = sys.n
    qs = [sym(c) for c in env.coordinates]
    out = []
    for i in range(n):
        body = add(*(mul(sym(_A), qs[k], scale_args(L[k][i], env.coordinates, sym(_A))) for k in range(n)))
        out.append(simplify(integrate01(body, _A)))
    for i in range(n):
        for k in range(i + 1, n):
            lhs = sub(diff(out[k], env.coordinates[i]), diff(out[i], env.coordinates[k]))
            if lhs.free_symbols or L[i][k].free_symbols:
                _check_equal(lhs, L[i][k], sys.params, f"curl of l at ({i + 1},{k + 1})", tol, samples, seed)
    return out


def build_m(sys: SecondOrderSystem, h: Matrix, K: Expr, L: Matrix, l: list) -> list:
    """Right-hand side ``m_i`` of ``dl_0/dq^i = m_i``, before velocity pinning."""
    env = sys.env
    n = sys.n
    q, v = env.coordinates, env.velocities
    vs = [sym(x) for x in v]
    hf = [add(*(mul(h[i][j], sys.forces[j]) for j in range(n))) for i in range(n)]
    out = []
    for i in range(n):
        Kv = diff(K, v[i])
        terms = [
            hf[i],
            neg(diff(K, q[i])),
            diff(Kv, "t"),
            add(*(mul(vs[j], diff(Kv, q[j])) for j in range(n))),
            neg(add(*(mul(vs[j], L[i][j]) for j in range(n)))),
            diff(l[i], "t"),
        ]
        out.append(add(*terms))
    return out


def build_l0(sys: SecondOrderSystem, h: Matrix, K: Expr, L: Matrix, l: list, reference_velocity=None, tol=1e-8, samples=64, seed=42) -> Expr:
    """``l_0 = int_0^1 da q^k m_k(t, a q)`` (gauge c(t) = 0)."""
    env = sys.env
    n = sys.n
    v0 = reference_velocity or [0] * n
    m = [
        _velocity_free(mi, sys, v0, f"m_{i + 1}", tol, samples, seed)
        for i, mi in enumerate(build_m(sys, h, K, L, l))
    ]
    qs = [sym(c) for c in env.coordinates]
    body = add(*(mul(qs[k], scale_args(m[k], env.coordinates, sym(_A))) for k in range(n)))
    l0 = simplify(integrate01(body, _A))
    for i in range(n):
        g = diff(l0, env.coordinates[i])
        if g.free_symbols or m[i].free_symbols:
            _check_equal(g, m[i], sys.params, f"gradient of l_0 component {i + 1}", tol, samples, seed)
    return l0


@dataclass
class LagrangianSO:
    """``L = K + l_i q'^i + l_0`` built from ``multiplier``."""

    env: SymbolEnv
    K: Expr
    l: list
    l0: Expr
    L: Expr
    multiplier: list
    reference_velocity: list

    @property
    def numeric(self) -> bool:
        """True when some part only evaluates by quadrature."""
        return has_integral(self.L)

    def to_json(self) -> dict:
        doc = {
            "K": None if has_integral(self.K) else to_string(self.K),
            "l": [None if has_integral(e) else to_string(e) for e in self.l],
            "l0": None if has_integral(self.l0) else to_string(self.l0),
            "L": None if self.numeric else to_string(self.L),
            "multiplier": [[to_string(e) for e in row] for row in self.multiplier],
            "reference_velocity": list(self.reference_velocity),
            "numeric": self.numeric,
        }
        return doc


def assemble(K: Expr, l: list, l0: Expr, env: SymbolEnv) -> Expr:
    return add(K, *(mul(li, sym(v)) for li, v in zip(l, env.velocities)), l0)


def euler_lagrange(L: Expr, env: SymbolEnv) -> list:
    """``dL/dq^i - d/dt dL/dq'^i`` with accelerations as symbols ``dd<name>``."""
    out = []
    q, v, a = env.coordinates, env.velocities, env.accelerations
    for i in range(env.n):
        Lv = diff(L, v[i])
        terms = [diff(L, q[i]), neg(diff(Lv, "t"))]
        terms += [neg(mul(diff(Lv, q[j]), sym(v[j]))) for j in range(env.n)]
        terms += [neg(mul(diff(Lv, v[j]), sym(a[j]))) for j in range(env.n)]
        out.append(add(*terms))
    return out


def multiplied_equations(sys: SecondOrderSystem, h: Matrix) -> list:
    """``-h_ij (q''^j - f^j)``, the target of the Euler-Lagrange expressions."""
    env = sys.env
    n = sys.n
    return [
        neg(add(*(mul(h[i][j], sub(sym(env.accelerations[j]), sys.forces[j])) for j in range(n))))
        for i in range(n)
    ]


def el_residual(sys: SecondOrderSystem, L: Expr, h: Matrix, samples=64, seed=42) -> tuple:
    """Largest ``|EL(L) + h (q'' - f)|`` over random points, with witness."""
    el = euler_lagrange(L, sys.env)
    target = multiplied_equations(sys, h)
    diffs = [sub(a, b) for a, b in zip(el, target)]
    pts = sample_points(diffs, sys.params, samples, seed=seed)
    worst = max(pts, key=lambda p: max(abs(x) for x in p[1]))
    return max(abs(x) for x in worst[1]), _state_witness(worst[0], sys.env)


def build_lagrangian(
    sys: SecondOrderSystem,
    h: Matrix,
    reference_velocity=None,
    tol: float = 1e-8,
    samples: int = 64,
    seed: int = 42,
) -> LagrangianSO:
    """Run the full reconstruction and certify ``EL(L) = -h (q'' - f)``."""
    K, v0 = build_K(sys, h, reference_velocity, tol, samples, seed)
    L_ik = build_L_ik(sys, h, K, v0, tol, samples, seed)
    l = build_l(sys, L_ik, tol, samples, seed)
    l0 = build_l0(sys, h, K, L_ik, l, v0, tol, samples, seed)
    L = assemble(K, l, l0, sys.env)
    r, w = el_residual(sys, L, h, samples, seed)
    if not r < tol:
        raise VerificationError("Euler-Lagrange postcondition failed", w, r)
    log.debug("built Lagrangian with EL residual %.3g", r)
    return LagrangianSO(sys.env, K, l, l0, L, [list(r_) for r_ in h], v0)
