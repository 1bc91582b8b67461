"""Numeric certification of constructed actions.

Actions are checked through their discrete action ``S = sum_k L(m_k) h`` on
midpoints ``m_k``; its gradient with respect to interior nodes approximates
the variational derivative to second order in ``h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ode import rk4_step
from .symexpr import Expr, SymbolEnv, diff, lambdify, sym
from .systems import FirstOrderSystem, SecondOrderSystem, reduce_to_first_order


@dataclass(frozen=True)
class DiscreteTrajectory:
    """Uniform time grid ``t`` of shape ``(K,)`` with states ``x`` of shape ``(K, N)``."""

    t: np.ndarray
    x: np.ndarray
    fixed_start: bool = True
    fixed_end: bool = True

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or len(t) != len(x):
            raise ValueError("t and x must have matching lengths")
        if len(t) < 3:
            raise ValueError("a trajectory needs at least 3 points")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise ValueError("time grid must increase strictly")
        if np.abs(steps - steps.mean()).max() > 1e-9 * max(1.0, abs(steps.mean())):
            raise ValueError("time grid must be uniform")
        if not np.all(np.isfinite(x)):
            raise ValueError("trajectory states must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    def subsample(self, every: int) -> "DiscreteTrajectory":
        return DiscreteTrajectory(self.t[::every], self.x[::every], self.fixed_start, self.fixed_end)


def _partials(action, t, x, v):
    if hasattr(action, "partials"):
        return action.partials(t, x, v)
    return action(t, x, v)


def discrete_variational_derivative(action, traj: DiscreteTrajectory) -> np.ndarray:
    """``(1/h) dS/dx_k`` at interior nodes, shape ``(K - 2, N)``.

    ``action`` provides ``partials(t, x, x') -> (dL/dx, dL/dx')`` on batches,
    or is such a callable itself.
    """
    h = traj.h
    tm = 0.5 * (traj.t[1:] + traj.t[:-1])
    xm = 0.5 * (traj.x[1:] + traj.x[:-1])
    vm = (traj.x[1:] - traj.x[:-1]) / h
    dx, dv = (np.asarray(a, dtype=float) for a in _partials(action, tm, xm, vm))
    out = 0.5 * (dx[:-1] + dx[1:]) + (dv[:-1] - dv[1:]) / h
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite discrete variational derivative")
    return out


def helmholtz_asymmetry(g, traj: DiscreteTrajectory, eps: float = 1e-6, order: int = 1) -> float:
    """Discrete self-adjointness defect of the equations ``g``.

    ``G_k = g(t_k, x_k, x'_k[, x''_k])`` uses central differences at interior
    nodes. Returns ``h * max |dG_k/dx_l - (dG_l/dx_k)^T|``, which approximates
    the antisymmetric part of ``delta g(t) / delta x(s)``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    K, N = traj.x.shape
    h = traj.h

    def G(X):  # X: (B, K, N) -> (B, K-2, N)
        B = len(X)
        tt = np.tile(traj.t[1:-1], B)
        xk = X[:, 1:-1].reshape(-1, N)
        v = ((X[:, 2:] - X[:, :-2]) / (2 * h)).reshape(-1, N)
        if order == 1:
            out = g(tt, xk, v)
        else:
            a = ((X[:, 2:] - 2 * X[:, 1:-1] + X[:, :-2]) / h**2).reshape(-1, N)
            out = g(tt, xk, v, a)
        return np.asarray(out, dtype=float).reshape(B, K - 2, N)

    # perturb every interior node component in both directions
    idx = [(l, b) for l in range(1, K - 1) for b in range(N)]
    X = np.broadcast_to(traj.x, (2 * len(idx), K, N)).copy()
    for r, (l, b) in enumerate(idx):
        X[2 * r, l, b] += eps
        X[2 * r + 1, l, b] -= eps
    vals = G(X)
    D = (vals[0::2] - vals[1::2]) / (2 * eps)  # [(l,b), k, a] = dG_{k,a}/dx_{l,b}
    D = D.reshape(K - 2, N, K - 2, N)  # [l, b, k, a]
    asym = D - np.transpose(D, (2, 3, 0, 1))
    out = h * float(np.abs(asym).max())
    if not math.isfinite(out):
        raise FloatingPointError("non-finite Helmholtz asymmetry")
    return out


# action adapters --------------------------------------------------------

class SymbolicLagrangian:
    """Second-order Lagrangian ``L(t, q, q')`` given as an expression.

    ``target`` is ``-h (q'' - f)`` when a system and multiplier are supplied.
    """

    order = 2

    def __init__(self, L: Expr, env: SymbolEnv, system: Optional[SecondOrderSystem] = None, multiplier=None):
        self.env = env
        self.N = env.n
        pnames = tuple(sorted(env.parameters))
        self._pvals = tuple(float(env.parameters[p]) for p in pnames)
        names = ("t",) + env.coordinates + env.velocities + pnames
        exprs = [diff(L, c) for c in env.coordinates] + [diff(L, v) for v in env.velocities]
        self._fn = lambdify(exprs, names)
        self._L = lambdify([L], names)
        self._target = None
        if system is not None and multiplier is not None:
            from .variational2 import multiplied_equations

            accel = system.env.accelerations
            self._target = lambdify(multiplied_equations(system, multiplier), names[: 1 + 2 * self.N] + accel + pnames)

    def _cols(self, t, q, v):
        q = np.atleast_2d(q)
        v = np.atleast_2d(v)
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(q),))
        return [t, *q.T, *v.T]

    def __call__(self, t, q, v):
        return self._L(*self._cols(t, q, v), *self._pvals)[0]

    def partials(self, t, q, v):
        vals = self._fn(*self._cols(t, q, v), *self._pvals)
        P = len(np.atleast_2d(q))
        vals = np.broadcast_to(vals, (2 * self.N, P))
        return vals[: self.N].T, vals[self.N :].T

    def target(self, t, q, v, a):
        if self._target is None:
            raise ValueError("no system/multiplier attached")
        a = np.atleast_2d(a)
        vals = self._target(*self._cols(t, q, v), *a.T, *self._pvals)
        return np.broadcast_to(vals, (self.N, len(a))).T


class GaugeShifted:
    """``L + dF/dt`` for an expression ``F(t, x)`` over ``coordinates``."""

    def __init__(self, action, F: Expr, coordinates: Sequence[str], parameters=None):
        self.action = action
        self.N = action.N
        self.order = getattr(action, "order", 1)
        coords = tuple(coordinates)
        pnames = tuple(sorted(parameters or {}))
        self._pvals = tuple(float((parameters or {})[p]) for p in pnames)
        Ft = diff(F, "t")
        gradF = [diff(F, c) for c in coords]
        # d/dx_a of (F_t + F_b x'^b): F_ta + F_ab x'^b, with x' as extra symbols
        vel = [f"__v{i}" for i in range(len(coords))]
        dx = []
        for c in coords:
            terms = diff(Ft, c)
            for b, vb in zip(gradF, vel):
                terms = terms + diff(b, c) * sym(vb)
            dx.append(terms)
        names = ("t",) + coords + tuple(vel) + pnames
        self._fn = lambdify(dx + gradF, names)

    def partials(self, t, x, v):
        dLdx, dLdv = _partials(self.action, t, x, v)
        x = np.atleast_2d(x)
        v = np.atleast_2d(v)
        tt = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        vals = np.broadcast_to(self._fn(tt, *x.T, *v.T, *self._pvals), (2 * self.N, len(x)))
        return dLdx + vals[: self.N].T, dLdv + vals[self.N :].T

    def target(self, *args):
        return self.action.target(*args)


# certification ----------------------------------------------------------

@dataclass
class VerificationReport:
    """Residuals at grid step ``h``; ``2h`` runs only feed the order estimate.

    ``target_mismatch`` compares the expected Euler-Lagrange values on the
    perturbed trajectories with the Richardson combination of the ``h`` and
    ``2h`` discrete derivatives, so it measures the action rather than the
    grid. Residuals are divided by ``scale = max(1, max |target|)``: a multiplier is
    fixed only up to a constant factor, and so is every residual it produces.
    """

    h: float
    on_solution_residual: float
    off_solution_residual: float
    on_solution_residual_coarse: float
    off_solution_residual_coarse: float
    target_mismatch: float
    scale: float
    tol: float
    n_trajectories: int
    helmholtz_asymmetry: Optional[float] = None
    per_trajectory: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.on_solution_residual, self.target_mismatch)

    @property
    def order_estimate(self) -> Optional[float]:
        """log2 of the residual ratio between ``2h`` and ``h``.

        Uses the on-solution residual unless it sits at rounding level (some
        actions are exact on solutions), then the off-solution one.
        """
        if self.on_solution_residual > _NOISE_FLOOR:
            return _order(self.on_solution_residual_coarse, self.on_solution_residual)
        return _order(self.off_solution_residual_coarse, self.off_solution_residual)

    @property
    def passed(self) -> bool:
        return bool(self.max_residual <= self.tol)

    def to_json(self) -> dict:
        order = self.order_estimate
        doc = {
            "max_residual": float(self.max_residual),
            "order_estimate": None if order is None else float(order),
            "on_solution_residual": float(self.on_solution_residual),
            "off_solution_residual": float(self.off_solution_residual),
            "on_solution_residual_coarse": float(self.on_solution_residual_coarse),
            "off_solution_residual_coarse": float(self.off_solution_residual_coarse),
            "target_mismatch": float(self.target_mismatch),
            "scale": float(self.scale),
            "h": float(self.h),
            "tol": float(self.tol),
            "n_trajectories": int(self.n_trajectories),
            "pass": self.passed,
        }
        if self.helmholtz_asymmetry is not None:
            doc["helmholtz_asymmetry"] = float(self.helmholtz_asymmetry)
        return doc


_NOISE_FLOOR = 1e-10


def _order(coarse: float, fine: float) -> Optional[float]:
    if not (coarse > 0 and fine > 0):
        return None
    return math.log2(coarse / fine)


def solution_trajectories(system: FirstOrderSystem, t0, x0, span: float, h: float, dt: float = 1e-3):
    """States of ``P`` solutions on the grids ``t0 + k h`` up to ``t0 + span``.

    Integrates with RK4 at a step that divides ``h`` and is at most ``dt``.
    Returns ``(times (P, K), states (P, K, N))``.
    """
    f = system.vector_field()
    sub = max(1, int(math.ceil(h / dt - 1e-9)))
    step = h / sub
    K = int(round(span / h)) + 1
    x = np.array(x0, dtype=float)
    t0 = np.asarray(t0, dtype=float)
    out = [x]
    for k in range(1, K):
        for i in range(sub):
            t = t0 + (k - 1) * h + i * step
            x = rk4_step(f, t, x, step)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("trajectory left the finite domain")
        out.append(x)
    times = t0[:, None] + h * np.arange(K)[None, :]
    return times, np.stack(out, axis=1)


def _bump(t, t0, span):
    """``4 s (1 - s)`` on ``s = (t - t0) / span`` with its first two derivatives."""
    s = (t - t0) / span
    return 4 * s * (1 - s), 4 * (1 - 2 * s) / span, -8 / span**2 * np.ones_like(s)


def certify(
    action,
    system,
    n_trajectories: int = 3,
    seed: int = 42,
    h: float = 0.01,
    intervals: int = 20,
    dt: float = 1e-3,
    tol: float = 1e-4,
    bump: float = 1e-2,
    t_range=(0.0, 1.0),
    state_box=(0.5, 1.0),
    helmholtz: bool = False,
) -> VerificationReport:
    """Discrete Euler-Lagrange residuals of ``action`` along trajectories of ``system``.

    On solutions the residual must vanish; on solutions plus a bump of size
    ``bump`` it must equal ``action.target``. Trajectories cover ``intervals``
    steps of size ``h``; every other node gives the ``2h`` run used for the
    convergence order.
    """
    order = getattr(action, "order", 1)
    if isinstance(system, SecondOrderSystem):
        if order != 2:
            raise ValueError("second-order systems need a second-order action")
        fo = reduce_to_first_order(system)
        n = system.n
    else:
        fo = system if isinstance(system, FirstOrderSystem) else system.as_first_order()
        n = fo.N
    if action.N != n:
        raise ValueError(f"action has {action.N} coordinates, system {n}")
    span = intervals * h
    if t_range[1] - t_range[0] < span:
        raise ValueError("t_range shorter than the trajectory span")
    rng = np.random.default_rng(seed)
    P = n_trajectories
    # start times on the integrator grid so every node is reached exactly
    slots = int(math.floor((t_range[1] - t_range[0] - span) / dt + 1e-9))
    t0 = t_range[0] + dt * rng.integers(0, slots + 1, size=P)
    lo, hi = state_box
    x0 = rng.uniform(lo, hi, size=(P, fo.N)) * rng.choice([-1.0, 1.0], size=(P, fo.N))
    direction = rng.standard_normal((P, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    times, states = solution_trajectories(fo, t0, x0, span, h, dt)
    f = fo.vector_field()

    per = []
    for p in range(P):
        tp, xp = times[p], states[p]
        b, db, ddb = _bump(tp, t0[p], span)
        if order == 1:
            sol = xp
            pert = xp + bump * b[:, None] * direction[p]
            vel = f(tp, xp) + bump * db[:, None] * direction[p]
            tgt = action.target(tp[1:-1], pert[1:-1], vel[1:-1])
        else:
            q, v = xp[:, :n], xp[:, n:]
            a = f(tp, xp)[:, n:]
            sol = q
            pert = q + bump * b[:, None] * direction[p]
            vp = v + bump * db[:, None] * direction[p]
            ap = a + bump * ddb[:, None] * direction[p]
            tgt = action.target(tp[1:-1], pert[1:-1], vp[1:-1], ap[1:-1])
        tgt = np.asarray(tgt)
        row = {"scale": max(1.0, float(np.abs(tgt).max()))}
        offs = {}
        for every, key in ((2, "coarse"), (1, "fine")):
            on = discrete_variational_derivative(action, DiscreteTrajectory(tp[::every], sol[::every]))
            offs[key] = discrete_variational_derivative(action, DiscreteTrajectory(tp[::every], pert[::every]))
            tg = tgt[every - 1 :: every]
            row[key] = (float(np.abs(on).max()) / row["scale"], float(np.abs(offs[key] - tg).max()) / row["scale"])
        # Richardson on the nodes shared by both grids cancels the h^2 term
        rich = (4.0 * offs["fine"][1::2] - offs["coarse"]) / 3.0
        row["match"] = float(np.abs(rich - tgt[1::2]).max()) / row["scale"]
        per.append(row)
    report = VerificationReport(
        h=h,
        on_solution_residual=max(r["fine"][0] for r in per),
        off_solution_residual=max(r["fine"][1] for r in per),
        on_solution_residual_coarse=max(r["coarse"][0] for r in per),
        off_solution_residual_coarse=max(r["coarse"][1] for r in per),
        target_mismatch=max(r["match"] for r in per),
        scale=max(r["scale"] for r in per),
        tol=tol,
        n_trajectories=P,
        per_trajectory=per,
    )
    if helmholtz and order == 1 and hasattr(action, "target"):
        traj = DiscreteTrajectory(times[0], states[0])
        report.helmholtz_asymmetry = helmholtz_asymmetry(action.target, traj)
    return report
