"""scikit-learn style front ends.

``fit`` takes a system (object or JSON document) and builds the action;
``transform`` evaluates its Euler-Lagrange expressions on rows of samples.
"""
from __future__ import annotations

from collections.abc import Mapping

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .search import Obstruction, search_multiplier
from .symexpr import lambdify, parse
from .systems import (
    FirstOrderSystem, LinearSystem, SchemaError, SecondOrderSystem,
    reduce_to_first_order, system_from_json,
)
from .variational1 import (
    _J_H_gradients, canonical_omega0, check_first_order_conditions,
    first_order_action, quadratic_action,
)
from .variational2 import build_lagrangian, check_multiplier, euler_lagrange


class ObstructionError(RuntimeError):
    """No multiplier in the requested ansatz class."""

    def __init__(self, obstruction: Obstruction):
        super().__init__(str(obstruction))
        self.obstruction = obstruction


def _as_system(system, kinds):
    if isinstance(system, Mapping):
        system = system_from_json(system)
    if not isinstance(system, kinds):
        names = ", ".join(k.__name__ for k in kinds)
        raise SchemaError(f"expected one of {names}, got {type(system).__name__}")
    return system


def _columns(X, width: int, what: str) -> np.ndarray:
    X = check_array(X, ensure_2d=True, dtype=np.float64)
    if X.shape[1] != width:
        raise ValueError(f"X must have {width} columns ({what}), got {X.shape[1]}")
    return X


class SecondOrderInverse(TransformerMixin, BaseEstimator):
    """Find or check a multiplier for ``q'' = f`` and build its Lagrangian.

    Parameters
    ----------
    ansatz : {"constant", "scaled_time", "diagonal_functions"}
        Search class used when ``multiplier`` is None.
    multiplier : list of list of str, optional
        Explicit multiplier entries in the expression grammar.
    samples, tol, seed :
        Settings of the random-point condition checks.
    """

    def __init__(self, ansatz="constant", multiplier=None, samples=64, tol=1e-8, seed=42):
        self.ansatz = ansatz
        self.multiplier = multiplier
        self.samples = samples
        self.tol = tol
        self.seed = seed

    def fit(self, system, y=None):
        sys = _as_system(system, (SecondOrderSystem,))
        if self.multiplier is None:
            found = search_multiplier(sys, self.ansatz, self.samples, self.seed, self.tol)
            if isinstance(found, Obstruction):
                raise ObstructionError(found)
            h = found.multiplier
        else:
            h = [[e if not isinstance(e, str) else parse(e, sys.env) for e in row] for row in self.multiplier]
        self.system_ = sys
        self.multiplier_ = h
        self.report_ = check_multiplier(sys, h, self.samples, self.tol, self.seed)
        if not self.report_.all_passed:
            raise ValueError(f"multiplier fails {self.report_.failed()}")
        self.lagrangian_ = build_lagrangian(sys, h, tol=self.tol, samples=self.samples, seed=self.seed)
        env = sys.env
        pnames = tuple(sorted(env.parameters))
        names = ("t",) + env.coordinates + env.velocities + env.accelerations + pnames
        self._el = lambdify(euler_lagrange(self.lagrangian_.L, env), names)
        self._pvals = tuple(float(env.parameters[p]) for p in pnames)
        self.n_features_in_ = 1 + 3 * sys.n
        return self

    def transform(self, X):
        """Rows ``[t, q, q', q'']`` to Euler-Lagrange values, shape ``(P, n)``."""
        check_is_fitted(self, "lagrangian_")
        X = _columns(X, self.n_features_in_, "t, q, q', q''")
        return self._el(*X.T, *self._pvals).T


class FirstOrderFlowAction(TransformerMixin, BaseEstimator):
    """Flow-built action ``L = J x' - H`` for any even-dimensional system.

    Second-order systems are reduced with ``p = q'`` first.
    """

    def __init__(self, omega0=None, dt=1e-3, samples=16, tol=1e-5, seed=42):
        self.omega0 = omega0
        self.dt = dt
        self.samples = samples
        self.tol = tol
        self.seed = seed

    def fit(self, system, y=None):
        sys = _as_system(system, (FirstOrderSystem, SecondOrderSystem, LinearSystem))
        if isinstance(sys, SecondOrderSystem):
            sys = reduce_to_first_order(sys)
        elif isinstance(sys, LinearSystem):
            sys = sys.as_first_order()
        omega0 = canonical_omega0(sys.N) if self.omega0 is None else np.asarray(self.omega0, dtype=float)
        self.system_ = sys
        self.action_ = first_order_action(sys, omega0, self.dt)
        self.report_ = check_first_order_conditions(self.action_, self.samples, self.tol, self.seed)
        self.n_features_in_ = 1 + 2 * sys.N
        return self

    def transform(self, X):
        """Rows ``[t, x, x']`` to ``-dH - d_t J + (dJ - dJ^T) x'``."""
        check_is_fitted(self, "action_")
        X = _columns(X, self.n_features_in_, "t, x, x'")
        N = self.system_.N
        t, x, v = X[:, 0], X[:, 1 : N + 1], X[:, N + 1 :]
        dJ, dH, dtJ = _J_H_gradients(self.action_, t, x, 1e-5)
        curl = dJ - np.swapaxes(dJ, 1, 2)
        return np.einsum("pab,pb->pa", curl, v) - dH - dtJ


class QuadraticActionEstimator(TransformerMixin, BaseEstimator):
    """Closed-form action of ``x' = A(t) x + j(t)`` tabulated on ``grid``."""

    def __init__(self, omega0=None, grid=None, dt=1e-3):
        self.omega0 = omega0
        self.grid = grid
        self.dt = dt

    def fit(self, system, y=None):
        lin = system
        if isinstance(system, Mapping):
            lin = system_from_json(system)
        if isinstance(lin, FirstOrderSystem):
            lin = lin.linear_parts()
            if lin is None:
                raise SchemaError("system is not affine in the state")
        if not isinstance(lin, LinearSystem):
            raise SchemaError("QuadraticActionEstimator needs a linear first-order system")
        self.system_ = lin
        self.action_ = quadratic_action(lin, self.omega0, self.grid, self.dt)
        self.n_features_in_ = 1 + 2 * lin.N
        return self

    def transform(self, X):
        """Rows ``[t, x, x']`` to ``Omega x' + (Omega'/2 - B) x - C``."""
        check_is_fitted(self, "action_")
        X = _columns(X, self.n_features_in_, "t, x, x'")
        N = self.system_.N
        t, x, v = X[:, 0], X[:, 1 : N + 1], X[:, N + 1 :]
        act = self.action_
        Om, B, C = act.matrices(t)
        A = act._A(t)
        # Omega' = -(A^T Omega + Omega A) along the flow
        dOm = -(np.swapaxes(A, 1, 2) @ Om + Om @ A)
        M = 0.5 * dOm - B
        return np.einsum("pab,pb->pa", Om, v) + np.einsum("pab,pb->pa", M, x) - C
