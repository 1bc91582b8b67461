import numpy as np
import pytest

from varinverse.symexpr import SymbolEnv, lambdify, parse
from varinverse.systems import LinearSystem, SecondOrderSystem
from varinverse.variational1 import canonical_omega0, quadratic_action
from varinverse.variational2 import euler_lagrange
from varinverse.verifier import (
    DiscreteTrajectory, GaugeShifted, SymbolicLagrangian, certify,
    discrete_variational_derivative, helmholtz_asymmetry,
)


def oscillator_linear():
    one, zero = parse("1"), parse("0")
    return LinearSystem(((zero, one), (-one, zero)), (zero, zero), {}, ("x1", "x2"))


class DoubledH:
    """Quadratic action with ``H`` replaced by ``2H``."""

    def __init__(self, action):
        self.a = action
        self.N = action.N

    def partials(self, t, x, v):
        Om, B, C = self.a.matrices(t)
        dx = 0.5 * np.einsum("pab,pb->pa", Om, v) - 2 * (np.einsum("pab,pb->pa", B, x) + C)
        return dx, 0.5 * np.einsum("pb,pba->pa", x, Om)

    def target(self, *args):
        return self.a.target(*args)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        DiscreteTrajectory([0, 1], [[0], [1]])
    with pytest.raises(ValueError):
        DiscreteTrajectory([0, 1, 1.5, 3], np.zeros(4))
    with pytest.raises(ValueError):
        DiscreteTrajectory([0, 1, 2], [0, np.nan, 1])
    tr = DiscreteTrajectory(np.linspace(0, 1, 11), np.zeros(11))
    assert tr.x.shape == (11, 1) and tr.h == pytest.approx(0.1)
    assert len(tr.subsample(2).t) == 6


def test_discrete_derivative_second_order_convergence():
    env = SymbolEnv(("q",))
    act = SymbolicLagrangian(parse("dq^2/2 - q^2/2", env), env)
    res = []
    for K in (21, 41):
        t = np.linspace(0, 1, K)
        res.append(np.abs(discrete_variational_derivative(act, DiscreteTrajectory(t, np.cos(t)))).max())
    assert res[1] < 1e-3
    assert np.log2(res[0] / res[1]) == pytest.approx(2.0, abs=0.2)


def test_discrete_derivative_matches_continuous_off_solution():
    env = SymbolEnv(("q",))
    act = SymbolicLagrangian(parse("dq^2/2 - q^3/3", env), env)
    t = np.linspace(0, 1, 201)
    q = np.sin(2 * t) + t**2
    ddq = -4 * np.sin(2 * t) + 2
    expect = -(q**2) - ddq
    got = discrete_variational_derivative(act, DiscreteTrajectory(t, q))[:, 0]
    assert np.abs(got - expect[1:-1]).max() < 1e-3


@pytest.mark.parametrize("seed", range(10))
def test_helmholtz_discriminates(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 0.2, 21)
    x0 = rng.uniform(-1, 1, 2)
    x = np.stack([x0[0] * np.cos(t) + x0[1] * np.sin(t), -x0[0] * np.sin(t) + x0[1] * np.cos(t)], axis=1)
    x = x + 1e-2 * rng.standard_normal(x.shape)
    traj = DiscreteTrajectory(t, x)
    om = canonical_omega0(2)
    raw = lambda t, x, v: v - x @ np.array([[0, 1], [-1, 0]]).T
    mult = lambda t, x, v: raw(t, x, v) @ om.T
    assert helmholtz_asymmetry(raw, traj) > 0.1
    assert helmholtz_asymmetry(mult, traj) <= 1e-6


def test_helmholtz_second_order_euler_lagrange():
    env = SymbolEnv(("q",))
    (el,) = euler_lagrange(parse("dq^2/2 - q^2/2", env), env)
    fn = lambdify([el], ("t", "q", "dq", "ddq"))
    g = lambda t, q, v, a: fn(t, q[:, 0], v[:, 0], a[:, 0]).T
    t = np.linspace(0, 0.2, 21)
    assert helmholtz_asymmetry(g, DiscreteTrajectory(t, np.sin(3 * t)), order=2) <= 1e-6


def test_certify_quadratic_oscillator():
    lin = oscillator_linear()
    act = quadratic_action(lin)
    rep = certify(act, lin.as_first_order(), n_trajectories=2)
    assert rep.passed
    assert rep.order_estimate == pytest.approx(2.0, abs=0.3)
    doc = rep.to_json()
    assert {"max_residual", "order_estimate"} <= set(doc)


def test_certify_rejects_doubled_H():
    lin = oscillator_linear()
    act = quadratic_action(lin)
    rep = certify(DoubledH(act), lin.as_first_order(), n_trajectories=2)
    assert not rep.passed
    assert rep.on_solution_residual > 0.1


def test_certify_second_order_dissipative(dissipative):
    c = "exp(-alpha*t)"
    env = dissipative.env
    L = parse(f"{c}*((dx^2+dy^2)/2 + (x^2+y^2)/2)", env)
    h = [[parse(c, env), parse("0")], [parse("0"), parse(c, env)]]
    rep = certify(SymbolicLagrangian(L, env, dissipative, h), dissipative, n_trajectories=2)
    assert rep.passed


def test_certify_wrong_lagrangian_fails(dissipative):
    env = dissipative.env
    L = parse("(dx^2+dy^2)/2 + (x^2+y^2)/2", env)
    h = [[parse("1"), parse("0")], [parse("0"), parse("1")]]
    assert not certify(SymbolicLagrangian(L, env, dissipative, h), dissipative, n_trajectories=2).passed


@pytest.mark.parametrize("F", ["t*x1", "t*x2 + x1*x2 - 3*x1^2 + t"])
def test_gauge_shift_leaves_residuals(F):
    # the midpoint rule sums dF/dt exactly when F is at most bilinear in (t, x)
    lin = oscillator_linear()
    act = quadratic_action(lin)
    shifted = GaugeShifted(act, parse(F), ("x1", "x2"))
    a = certify(act, lin.as_first_order(), n_trajectories=2)
    b = certify(shifted, lin.as_first_order(), n_trajectories=2)
    assert abs(a.on_solution_residual - b.on_solution_residual) < 1e-10
    assert abs(a.target_mismatch - b.target_mismatch) < 1e-10


def test_cubic_gauge_changes_residuals_at_grid_order():
    lin = oscillator_linear()
    act = quadratic_action(lin)
    shifted = GaugeShifted(act, parse("x2^2*x1"), ("x1", "x2"))
    b = certify(shifted, lin.as_first_order(), n_trajectories=2)
    assert b.passed and b.order_estimate == pytest.approx(2.0, abs=0.3)


def test_certify_deterministic():
    lin = oscillator_linear()
    act = quadratic_action(lin)
    a = certify(act, lin.as_first_order(), n_trajectories=2, seed=7).to_json()
    b = certify(act, lin.as_first_order(), n_trajectories=2, seed=7).to_json()
    assert a == b


def test_certify_dimension_mismatch():
    two_d = SecondOrderSystem.from_strings(["a", "b"], {"a": "-a", "b": "-b"})
    with pytest.raises(ValueError):
        certify(quadratic_action(oscillator_linear()), two_d)
