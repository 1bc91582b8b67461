"""Fixed-step classical Runge-Kutta, vectorised over independent start points."""
from __future__ import annotations

import math

import numpy as np


class IntegrationError(RuntimeError):
    """The integrated state left the finite domain."""


def rk4_step(rhs, t, y, h):
    """One RK4 step; ``h`` may be a scalar or broadcast against ``y``'s leading axis."""
    hb = np.reshape(h, np.shape(h) + (1,) * (np.ndim(y) - np.ndim(h)))
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * hb * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * hb * k2)
    k4 = rhs(t + h, y + hb * k3)
    return y + hb / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, t0, t1, y0, dt: float = 1e-3, what: str = "state"):
    """Integrate from ``t0`` to ``t1`` (arrays of shape ``(P,)`` or scalars).

    Every point takes the same number of equal steps, the fewest that keeps
    each step no longer than ``dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    y = np.array(y0, dtype=float)
    span = np.abs(t1 - t0)
    steps = int(math.ceil(float(np.max(span, initial=0.0)) / dt - 1e-9))
    if steps == 0:
        return y
    h = (t1 - t0) / steps
    t = t0.copy()
    for k in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            y = rk4_step(rhs, t, y, h)
        t = t0 + (k + 1) * h
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite {what} after {k + 1} steps of size {float(np.max(np.abs(h))):.3g}")
    return y
