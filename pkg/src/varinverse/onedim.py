"""One degree of freedom: the multiplier transport equation always has a
solution, built here by characteristics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ode import integrate
from .symexpr import Expr, diff, lambdify
from .systems import SecondOrderSystem


@dataclass
class OneDimMultiplier:
    """Numeric field ``h(t, q, q')`` with ``h(0, q, q') = h0(q, q')``."""

    system: SecondOrderSystem
    h0: Expr
    dt: float = 1e-3
    t_max: float = np.inf

    def __post_init__(self):
        if self.system.n != 1:
            raise ValueError("solve_1d_multiplier needs a one-dimensional system")
        env = self.system.env
        self._q, self._v = env.coordinates[0], env.velocities[0]
        bad = self.h0.free_symbols - {self._q, self._v} - set(env.parameters)
        if bad:
            raise ValueError(f"h0 may depend on q and q' only, found {sorted(bad)}")
        pnames = tuple(sorted(env.parameters))
        pvals = tuple(float(env.parameters[p]) for p in pnames)
        f = self.system.forces[0]
        fn = lambdify([f, diff(f, self._v)], ("t", self._q, self._v) + pnames)
        h0 = lambdify([self.h0], (self._q, self._v) + pnames)
        self._field = lambda t, q, v: fn(t, q, v, *pvals)
        self._h0 = lambda q, v: h0(q, v, *pvals)[0]

    def _rhs(self, t, y):
        q, v = y[..., 0], y[..., 1]
        f, dfdv = self._field(t, q, v)
        return np.stack([v, f, np.broadcast_to(dfdv, q.shape)], axis=-1)

    def __call__(self, t, q, v):
        """Evaluate at broadcastable arrays of ``(t, q, q')``."""
        t, q, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, q, v)))
        shape = t.shape
        t, q, v = t.ravel(), q.ravel(), v.ravel()
        if np.any(np.abs(t) > self.t_max):
            raise ValueError(f"|t| exceeds t_max={self.t_max}")
        y0 = np.stack([q, v, np.zeros_like(q)], axis=-1)
        # backward along the characteristic; the third slot accumulates -int df/dq'
        y = integrate(self._rhs, t, np.zeros_like(t), y0, self.dt, "characteristic")
        h = self._h0(y[:, 0], y[:, 1]) * np.exp(y[:, 2])
        return np.broadcast_to(h, t.shape).reshape(shape)

    def transport_residual(self, samples: int = 64, seed: int = 42, eps: float = 1e-4, box=(0.1, 2.0)) -> float:
        """Largest ``|h_t + q' h_q + (f h)_q'|`` by central differences."""
        rng = np.random.default_rng(seed)
        lo, hi = box
        pts = rng.uniform(lo, hi, size=(3, samples)) * rng.choice([-1.0, 1.0], size=(3, samples))
        t, q, v = pts
        if np.isfinite(self.t_max):
            t = np.clip(t, -self.t_max + eps, self.t_max - eps)
        f, _ = self._field(t, q, v)
        dt = (self(t + eps, q, v) - self(t - eps, q, v)) / (2 * eps)
        dq = (self(t, q + eps, v) - self(t, q - eps, v)) / (2 * eps)
        fp = self._field(t, q, v + eps)[0] * self(t, q, v + eps)
        fm = self._field(t, q, v - eps)[0] * self(t, q, v - eps)
        res = dt + v * dq + (fp - fm) / (2 * eps)
        return float(np.max(np.abs(res)))


def solve_1d_multiplier(sys: SecondOrderSystem, h0: Expr, dt: float = 1e-3, t_max: float = np.inf) -> OneDimMultiplier:
    """Multiplier for ``q'' = f`` with initial data ``h0(q, q')`` at ``t = 0``."""
    return OneDimMultiplier(sys, h0, dt, t_max)
