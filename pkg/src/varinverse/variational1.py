"""First-order inverse problem.

Every system ``x' = f(t, x)`` of even dimension admits the multiplier
``Omega = (d chi)^T Omega0 (d chi)`` where ``chi(t, .)`` maps a state back to
its initial value. The Lagrangian ``L = J_a x'^a - H`` then follows from ray
integrals of ``Omega`` and ``Omega f``.

All evaluations are vectorised: states have shape ``(P, N)`` and times are
scalars or arrays of shape ``(P,)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ode import IntegrationError, integrate
from .reports import ConditionReport, ConditionResult
from .symexpr import gauss_legendre01
from .systems import FirstOrderSystem, LinearSystem, SchemaError

__all__ = [
    "FlowMap", "FirstOrderAction", "QuadraticAction", "IntegrationError",
    "canonical_omega0", "validate_omega0", "omega_at", "build_J", "build_H",
    "quadratic_action", "check_first_order_conditions", "first_order_action",
]


def canonical_omega0(N: int) -> np.ndarray:
    """``[[0, I], [-I, 0]]``."""
    if N < 2 or N % 2:
        raise SchemaError(f"symplectic seed needs an even dimension >= 2, got {N}")
    n = N // 2
    out = np.zeros((N, N))
    out[:n, n:] = np.eye(n)
    out[n:, :n] = -np.eye(n)
    return out


def validate_omega0(omega0, N: int) -> np.ndarray:
    m = np.asarray(omega0, dtype=float)
    if m.shape != (N, N):
        raise SchemaError(f"omega0 must be {N}x{N}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise SchemaError("omega0 has non-finite entries")
    if np.abs(m + m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise SchemaError("omega0 must be antisymmetric")
    if abs(np.linalg.det(m)) < 1e-12:
        raise SchemaError("omega0 must be nonsingular")
    return m


def _points(x, N):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[-1] != N:
        raise ValueError(f"states must have {N} components")
    return X, single


def _times(t, P):
    t = np.asarray(t, dtype=float)
    return np.broadcast_to(t, (P,)).copy() if t.ndim == 0 else t.reshape(P)


class FlowMap:
    """Flow ``phi(t, x0)``, its inverse ``chi(t, x)`` and ``d chi / dx``."""

    def __init__(self, system: FirstOrderSystem, dt: float = 1e-3):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.system = system
        self.dt = float(dt)
        self.N = system.N
        self._f = system.vector_field()
        self._Df = system.jacobian_field()

    def _state_rhs(self, t, X):
        return self._f(t, X)

    def _variational_rhs(self, t, Y):
        N = self.N
        X = Y[:, :N]
        M = Y[:, N:].reshape(-1, N, N)
        dM = self._Df(t, X) @ M
        return np.concatenate([self._f(t, X), dM.reshape(-1, N * N)], axis=1)

    def flow(self, t, x0):
        X, single = _points(x0, self.N)
        t = _times(t, len(X))
        out = integrate(self._state_rhs, np.zeros_like(t), t, X, self.dt, "flow state")
        return out[0] if single else out

    def inverse_flow(self, t, x):
        X, single = _points(x, self.N)
        t = _times(t, len(X))
        out = integrate(self._state_rhs, t, np.zeros_like(t), X, self.dt, "inverse flow state")
        return out[0] if single else out

    def backward(self, t, X):
        """``(chi(t, X), d chi/dx (t, X))`` for ``X`` of shape ``(P, N)``."""
        P, N = X.shape
        t = _times(t, P)
        Y = np.concatenate([X, np.broadcast_to(np.eye(N).ravel(), (P, N * N))], axis=1)
        Y = integrate(self._variational_rhs, t, np.zeros_like(t), Y, self.dt, "variational state")
        return Y[:, :N], Y[:, N:].reshape(P, N, N)

    def flow_jacobian(self, t, x):
        X, single = _points(x, self.N)
        M = self.backward(t, X)[1]
        return M[0] if single else M


def _omega(fm: FlowMap, omega0: np.ndarray, t, X) -> np.ndarray:
    M = fm.backward(t, X)[1]
    return np.einsum("pca,cd,pdb->pab", M, omega0, M)


def omega_at(fm: FlowMap, omega0, t, x) -> np.ndarray:
    """``Omega(t, x) = (d chi)^T Omega0 (d chi)``."""
    omega0 = validate_omega0(omega0, fm.N)
    X, single = _points(x, fm.N)
    out = _omega(fm, omega0, t, X)
    return out[0] if single else out


def _ray(X, t, nodes):
    """Stack ``s_i X`` for every node; returns ``(Q*P, N)`` points and times."""
    Q = len(nodes)
    pts = (nodes[:, None, None] * X[None, :, :]).reshape(Q * len(X), -1)
    return pts, np.tile(t, Q)


def _ray_integrals(fm: FlowMap, omega0, t, X, quad_nodes=32):
    """``J(t, X)`` and ``H(t, X)`` by Gauss-Legendre quadrature on the ray.

    ``H`` omits the ``x . d_t J`` term: with ``J`` from the ray formula,
    ``y^b d_t J_b(t, y)`` is a contraction of the antisymmetric ``d_t Omega``
    with ``y y`` and vanishes identically.
    """
    P, N = X.shape
    t = _times(t, P)
    s, w = gauss_legendre01(quad_nodes)
    pts, ts = _ray(X, t, s)
    Om = _omega(fm, omega0, ts, pts).reshape(len(s), P, N, N)
    F = fm._f(ts, pts).reshape(len(s), P, N)
    # J_a = sum_i w_i s_i x^b Omega_ba(t, s_i x)
    J = np.einsum("q,qpba,pb->pa", w * s, Om, X)
    H = np.einsum("q,pb,qpba,qpa->p", w, X, Om, F)
    return J, H


def build_J(fm: FlowMap, omega0, t, x, quad_nodes: int = 32) -> np.ndarray:
    """``J_a(t, x) = int_0^1 x^b Omega_ba(t, s x) s ds``."""
    omega0 = validate_omega0(omega0, fm.N)
    X, single = _points(x, fm.N)
    P, N = X.shape
    s, w = gauss_legendre01(quad_nodes)
    pts, ts = _ray(X, _times(t, P), s)
    Om = _omega(fm, omega0, ts, pts).reshape(len(s), P, N, N)
    J = np.einsum("q,qpba,pb->pa", w * s, Om, X)
    return J[0] if single else J


def build_H(fm: FlowMap, omega0, t, x, quad_nodes: int = 32, dt_fd: float = 1e-4) -> np.ndarray:
    """``H(t, x) = int_0^1 x^b [Omega_ba f^a - d_t J_b](t, s x) ds``.

    ``d_t J`` is a central difference with step ``dt_fd``.
    """
    omega0 = validate_omega0(omega0, fm.N)
    X, single = _points(x, fm.N)
    P, N = X.shape
    t = _times(t, P)
    s, w = gauss_legendre01(quad_nodes)
    pts, ts = _ray(X, t, s)
    Om = _omega(fm, omega0, ts, pts).reshape(len(s), P, N, N)
    F = fm._f(ts, pts).reshape(len(s), P, N)
    dJ = (build_J(fm, omega0, ts + dt_fd, pts, quad_nodes) - build_J(fm, omega0, ts - dt_fd, pts, quad_nodes)) / (2 * dt_fd)
    dJ = dJ.reshape(len(s), P, N)
    H = np.einsum("q,pb,qpba,qpa->p", w, X, Om, F) - np.einsum("q,pb,qpb->p", w, X, dJ)
    return H[0] if single else H


class _ActionBase:
    """Shared interface consumed by the verifier."""

    N: int

    def omega(self, t, x):
        raise NotImplementedError

    def J(self, t, x):
        raise NotImplementedError

    def H(self, t, x):
        raise NotImplementedError

    def field(self, t, x):
        raise NotImplementedError

    def J_and_H(self, t, x):
        return self.J(t, x), self.H(t, x)

    def lagrangian(self, t, x, xdot):
        X, single = _points(x, self.N)
        V = np.atleast_2d(xdot)
        out = np.einsum("pa,pa->p", self.J(t, X), V) - self.H(t, X)
        return out[0] if single else out

    def target(self, t, x, xdot):
        """``Omega (x' - f)``, the expected Euler-Lagrange expression."""
        X, single = _points(x, self.N)
        V = np.atleast_2d(xdot)
        out = np.einsum("pab,pb->pa", self.omega(t, X), V - self.field(t, X))
        return out[0] if single else out


@dataclass
class FirstOrderAction(_ActionBase):
    """``L = J_a(t, x) x'^a - H(t, x)`` from the flow, gauges ``phi = 0``, ``c = 0``."""

    system: FirstOrderSystem
    omega0: np.ndarray
    dt: float = 1e-3
    quad_nodes: int = 32
    fd_step: float = 1e-5
    gauge: dict = field(default_factory=lambda: {"phi": "0", "c": "0"})

    def __post_init__(self):
        self.N = self.system.N
        self.omega0 = validate_omega0(self.omega0, self.N)
        self.flow = FlowMap(self.system, self.dt)

    def omega(self, t, x):
        return omega_at(self.flow, self.omega0, t, x)

    def J(self, t, x):
        X, single = _points(x, self.N)
        J = _ray_integrals(self.flow, self.omega0, t, X, self.quad_nodes)[0]
        return J[0] if single else J

    def H(self, t, x):
        X, single = _points(x, self.N)
        H = _ray_integrals(self.flow, self.omega0, t, X, self.quad_nodes)[1]
        return H[0] if single else H

    def field(self, t, x):
        X, _ = _points(x, self.N)
        return self.flow._f(_times(t, len(X)), X)

    def J_and_H(self, t, x):
        X, _ = _points(x, self.N)
        return _ray_integrals(self.flow, self.omega0, t, X, self.quad_nodes)

    def partials(self, t, x, xdot):
        """``(dL/dx, dL/dx')`` with the x-gradients of ``J`` and ``H`` by central differences."""
        X, _ = _points(x, self.N)
        V = np.atleast_2d(xdot)
        P, N = X.shape
        t = _times(t, P)
        e = self.fd_step
        offsets = np.concatenate([np.zeros((1, N)), e * np.eye(N), -e * np.eye(N)])
        pts = (X[None, :, :] + offsets[:, None, :]).reshape(-1, N)
        J, H = _ray_integrals(self.flow, self.omega0, np.tile(t, len(offsets)), pts, self.quad_nodes)
        J = J.reshape(len(offsets), P, N)
        H = H.reshape(len(offsets), P)
        dJ = (J[1 : N + 1] - J[N + 1 :]) / (2 * e)  # [a, p, b] = d_a J_b
        dH = (H[1 : N + 1] - H[N + 1 :]) / (2 * e)  # [a, p]
        dLdx = np.einsum("apb,pb->pa", dJ, V) - dH.T
        return dLdx, J[0]


def first_order_action(system: FirstOrderSystem, omega0=None, dt: float = 1e-3) -> FirstOrderAction:
    if omega0 is None:
        omega0 = canonical_omega0(system.N)
    return FirstOrderAction(system, np.asarray(omega0, dtype=float), dt)


# linear systems ---------------------------------------------------------

def _matrix_fields(lin: LinearSystem):
    """Evaluators ``A(t) -> (P, N, N)`` and ``j(t) -> (P, N)`` for time arrays."""
    from .systems import _bind

    N = lin.N
    fa = _bind([a for r in lin.A for a in r], ("t",), lin.parameters)
    fj = _bind(list(lin.j), ("t",), lin.parameters)

    def A(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        vals = np.broadcast_to(fa(t), (N * N, len(t)))
        return np.moveaxis(vals.reshape(N, N, len(t)), -1, 0)

    def j(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.broadcast_to(fj(t), (N, len(t))).T

    return A, j


@dataclass
class QuadraticAction(_ActionBase):
    """``L = 1/2 x Omega x' - 1/2 x B x - C x`` tabulated on ``grid``."""

    linear: LinearSystem
    omega0: np.ndarray
    grid: np.ndarray
    Gamma: np.ndarray
    Omega: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float = 1e-3

    def __post_init__(self):
        self.N = self.linear.N
        self._A, self._j = _matrix_fields(self.linear)

    @property
    def Lambda(self) -> np.ndarray:
        return np.linalg.inv(self.Gamma)

    def matrices(self, t):
        """``(Omega, B, C)`` at arbitrary times, integrating ``Gamma`` afresh."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        G = _fundamental(self._A, t, self.N, self.dt)
        return _omega_B_C(G, self._A(t), self._j(t), self.omega0)

    def omega(self, t, x):
        X, single = _points(x, self.N)
        Om = self.matrices(_times(t, len(X)))[0]
        return Om[0] if single else Om

    def J(self, t, x):
        X, single = _points(x, self.N)
        Om = self.matrices(_times(t, len(X)))[0]
        J = 0.5 * np.einsum("pb,pba->pa", X, Om)
        return J[0] if single else J

    def H(self, t, x):
        X, single = _points(x, self.N)
        _, B, C = self.matrices(_times(t, len(X)))
        H = 0.5 * np.einsum("pa,pab,pb->p", X, B, X) + np.einsum("pa,pa->p", C, X)
        return H[0] if single else H

    def field(self, t, x):
        X, _ = _points(x, self.N)
        t = _times(t, len(X))
        return np.einsum("pab,pb->pa", self._A(t), X) + self._j(t)

    def partials(self, t, x, xdot):
        X, _ = _points(x, self.N)
        V = np.atleast_2d(xdot)
        Om, B, C = self.matrices(_times(t, len(X)))
        dLdx = 0.5 * np.einsum("pab,pb->pa", Om, V) - np.einsum("pab,pb->pa", B, X) - C
        dLdv = 0.5 * np.einsum("pb,pba->pa", X, Om)
        return dLdx, dLdv

    def to_json(self) -> list:
        return [
            {"t": float(t), "Omega": om.tolist(), "B": b.tolist(), "C": c.tolist()}
            for t, om, b, c in zip(self.grid, self.Omega, self.B, self.C)
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _fundamental(A, times, N, dt):
    """``Gamma(t)`` with ``Gamma' = A Gamma``, ``Gamma(0) = I`` at each time."""
    P = len(times)

    def rhs(t, G):
        return A(t) @ G

    G0 = np.broadcast_to(np.eye(N), (P, N, N)).copy()
    return integrate(rhs, np.zeros(P), times, G0, dt, "fundamental matrix")


def _omega_B_C(Gamma, A, j, omega0):
    cond = np.linalg.cond(Gamma)
    if not np.all(np.isfinite(cond)) or np.max(cond) > 1e12:
        raise IntegrationError(f"fundamental matrix is numerically singular (condition number {np.max(cond):.3g})")
    Lam = np.linalg.inv(Gamma)
    Om = np.einsum("pca,cd,pdb->pab", Lam, omega0, Lam)
    Om = 0.5 * (Om - np.swapaxes(Om, 1, 2))
    B = 0.5 * (Om @ A - np.swapaxes(A, 1, 2) @ Om)
    B = 0.5 * (B + np.swapaxes(B, 1, 2))
    C = np.einsum("pab,pb->pa", Om, j)
    return Om, B, C


def quadratic_action(lin: LinearSystem, omega0=None, grid=None, dt: float = 1e-3) -> QuadraticAction:
    """Closed-form action of ``x' = A(t) x + j(t)`` tabulated on ``grid``."""
    N = lin.N
    omega0 = validate_omega0(canonical_omega0(N) if omega0 is None else omega0, N)
    grid = np.linspace(0.0, 1.0, 11) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise SchemaError("grid must be a non-empty list of times")
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise SchemaError("grid must start at 0 and increase strictly")
    A, j = _matrix_fields(lin)
    Gamma = _fundamental(A, grid, N, dt)
    Om, B, C = _omega_B_C(Gamma, A(grid), j(grid), omega0)
    return QuadraticAction(lin, omega0, grid, Gamma, Om, B, C, dt)


# condition checks -------------------------------------------------------

def _sample_states(rng, P, N, box=(0.1, 1.0)):
    lo, hi = box
    return rng.uniform(lo, hi, size=(P, N)) * rng.choice([-1.0, 1.0], size=(P, N))


def check_first_order_conditions(
    action,
    samples: int = 16,
    tol: float = 1e-5,
    seed: int = 42,
    t_range=(0.0, 1.0),
    eps: float = 1e-4,
) -> ConditionReport:
    """Residuals of antisymmetry, the Jacobi identity, the transport equation
    and the curl and gradient identities for ``J`` and ``H``, at seeded random
    points with times in ``t_range``.
    """
    rng = np.random.default_rng(seed)
    N = action.N
    X = _sample_states(rng, samples, N)
    t = rng.uniform(t_range[0] + eps, t_range[1] - eps, size=samples)
    # Omega at the point and its +/- shifts in every coordinate and in time
    offs = np.concatenate([np.zeros((1, N)), eps * np.eye(N), -eps * np.eye(N), np.zeros((2, N))])
    tshift = np.concatenate([np.zeros(2 * N + 1), [eps, -eps]])
    pts = (X[None] + offs[:, None]).reshape(-1, N)
    tt = (t[None] + tshift[:, None]).reshape(-1)
    Om = np.asarray(action.omega(tt, pts)).reshape(len(offs), samples, N, N)
    O = Om[0]
    dO = (Om[1 : N + 1] - Om[N + 1 : 2 * N + 1]) / (2 * eps)  # [g, p, a, b] = d_g Omega_ab
    dtO = (Om[2 * N + 1] - Om[2 * N + 2]) / (2 * eps)
    f = action.field(t, X)
    Df = _field_jacobian(action, t, X, eps)  # (p, a, b) = d_b f^a
    witness = lambda k: {"t": float(t[k]), **{f"x{i + 1}": float(X[k, i]) for i in range(N)}}

    def result(cid, per_point):
        k = int(np.argmax(per_point))
        r = float(per_point[k])
        return ConditionResult(cid, bool(r < tol), r, witness(k))

    anti = np.abs(O + np.swapaxes(O, 1, 2)).max(axis=(1, 2))
    jac = dO.transpose(1, 0, 2, 3)  # (p, g, a, b)
    cyc = jac + np.einsum("pgab->pabg", jac) + np.einsum("pgab->pbga", jac)
    jacobi = np.abs(cyc).max(axis=(1, 2, 3))
    lie = (
        dtO
        + np.einsum("pg,pgab->pab", f, jac)
        + np.einsum("pgb,pga->pab", O, Df)
        + np.einsum("pag,pgb->pab", O, Df)
    )
    transport = np.abs(lie).max(axis=(1, 2))
    dJ, dH, dtJ = _J_H_gradients(action, t, X, eps)
    curl = np.abs(dJ - np.swapaxes(dJ, 1, 2) - O).max(axis=(1, 2))
    grad = np.abs(np.einsum("pab,pb->pa", O, f) - dtJ - dH).max(axis=1)
    return ConditionReport([
        result("antisymmetry", anti),
        result("jacobi", jacobi),
        result("transport", transport),
        result("curl", curl),
        result("gradient", grad),
    ])


def _field_jacobian(action, t, X, eps):
    P, N = X.shape
    offs = np.concatenate([eps * np.eye(N), -eps * np.eye(N)])
    pts = (X[None] + offs[:, None]).reshape(-1, N)
    F = action.field(np.tile(t, 2 * N), pts).reshape(2 * N, P, N)
    d = (F[:N] - F[N:]) / (2 * eps)  # [b, p, a] = d_b f^a
    return np.transpose(d, (1, 2, 0))


def _J_H_gradients(action, t, X, eps):
    P, N = X.shape
    offs = np.concatenate([eps * np.eye(N), -eps * np.eye(N), np.zeros((2, N))])
    pts = (X[None] + offs[:, None]).reshape(-1, N)
    tt = np.concatenate([np.tile(t, 2 * N), t + eps, t - eps])
    J, H = action.J_and_H(tt, pts)
    J = np.asarray(J).reshape(len(offs), P, N)
    H = np.asarray(H).reshape(len(offs), P)
    dJ = np.moveaxis((J[:N] - J[N : 2 * N]) / (2 * eps), 0, 1)
    dH = ((H[:N] - H[N : 2 * N]) / (2 * eps)).T
    dtJ = (J[2 * N] - J[2 * N + 1]) / (2 * eps)
    return dJ, dH, dtJ
