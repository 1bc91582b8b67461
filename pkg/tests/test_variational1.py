import numpy as np
import pytest

from varinverse.systems import FirstOrderSystem, LinearSystem, SchemaError, SecondOrderSystem, reduce_to_first_order
from varinverse.symexpr import parse, to_string
from varinverse.variational1 import (
    FlowMap, build_H, build_J, canonical_omega0, check_first_order_conditions,
    first_order_action, omega_at, quadratic_action, validate_omega0,
)

OM2 = canonical_omega0(2)


def fo(field, coords=("q", "p"), params=None):
    return FirstOrderSystem.from_strings(list(coords), dict(zip(coords, field)), params or {})


def linear(A, j, params=None):
    return LinearSystem(
        tuple(tuple(parse(str(a)) for a in row) for row in A),
        tuple(parse(str(v)) for v in j),
        params or {},
        tuple(f"x{i + 1}" for i in range(len(A))),
    )


@pytest.fixture
def oscillator():
    return fo(["p", "-q"])


@pytest.fixture
def free():
    return fo(["p", "0"])


# reduction ---------------------------------------------------------------

def test_reduce_examples(douglas, magnetic):
    red = reduce_to_first_order(SecondOrderSystem.from_strings(["x"], {"x": "-x"}))
    assert [to_string(e) for e in red.field] == ["px", "-x"]
    red = reduce_to_first_order(douglas)
    assert red.env.coordinates == ("x", "y", "px", "py")
    assert [to_string(e) for e in red.field] == ["px", "py", "-py", "-y"]
    red = reduce_to_first_order(magnetic)
    assert [to_string(e) for e in red.field][:2] == ["px", "py"]


# flow --------------------------------------------------------------------

def test_free_particle_inverse_flow_and_jacobian(free):
    fm = FlowMap(free)
    x = np.array([0.3, -0.8])
    t = 0.7
    assert np.allclose(fm.inverse_flow(t, x), [0.3 + 0.8 * t, -0.8], atol=1e-12)
    assert np.allclose(fm.flow_jacobian(t, x), [[1, -t], [0, 1]], atol=1e-12)


def test_oscillator_flow_is_rotation(oscillator):
    fm = FlowMap(oscillator)
    x0 = np.array([0.6, -0.2])
    for t in np.linspace(0, 1, 6):
        c, s = np.cos(t), np.sin(t)
        expect = np.array([[c, s], [-s, c]]) @ x0
        assert np.allclose(fm.flow(t, x0), expect, atol=1e-10)
        assert np.allclose(fm.inverse_flow(t, fm.flow(t, x0)), x0, atol=1e-10)


def test_jacobian_identity_at_zero(douglas):
    fm = FlowMap(reduce_to_first_order(douglas))
    assert np.array_equal(fm.flow_jacobian(0.0, np.ones(4)), np.eye(4))


# omega / J / H -----------------------------------------------------------

def test_omega_examples(oscillator, free):
    x = np.array([[0.4, 0.1], [-0.9, 0.5]])
    for sys in (oscillator, free):
        fm = FlowMap(sys)
        assert np.array_equal(omega_at(fm, OM2, 0.0, x[0]), OM2)
        assert np.allclose(omega_at(fm, OM2, 0.8, x), OM2, atol=1e-10)


def test_omega_determinant_invariant(douglas):
    fm = FlowMap(reduce_to_first_order(douglas))
    om0 = canonical_omega0(4)
    X = np.random.default_rng(0).uniform(-1, 1, (5, 4))
    M = fm.flow_jacobian(0.6, X)
    om = omega_at(fm, om0, 0.6, X)
    assert np.allclose(np.linalg.det(om), np.linalg.det(M) ** 2 * np.linalg.det(om0))
    assert np.allclose(om, -np.swapaxes(om, 1, 2), atol=1e-14)


def test_J_and_H_oscillator(oscillator):
    fm = FlowMap(oscillator)
    x = np.array([0.7, -0.3])
    assert np.allclose(build_J(fm, OM2, 0.4, x), 0.5 * x @ OM2, atol=1e-10)
    assert build_H(fm, OM2, 0.4, x) == pytest.approx(-0.5 * x @ x, abs=1e-8)
    assert np.allclose(build_J(fm, OM2, 0.4, np.zeros(2)), 0)
    assert build_H(fm, OM2, 0.4, np.zeros(2)) == 0


def test_H_free_particle(free):
    fm = FlowMap(free)
    x = np.array([0.2, 0.9])
    assert build_H(fm, OM2, 0.5, x) == pytest.approx(-0.5 * 0.81, abs=1e-8)


def test_fast_ray_integrals_match_faithful_H(douglas):
    act = first_order_action(reduce_to_first_order(douglas))
    X = np.random.default_rng(3).uniform(-1, 1, (3, 4))
    _, H = act.J_and_H(0.5, X)
    faithful = build_H(act.flow, act.omega0, 0.5, X)
    assert np.allclose(H, faithful, atol=1e-10)


@pytest.mark.parametrize("bad", [np.eye(2), np.zeros((2, 2)), np.ones((3, 3))])
def test_validate_omega0(bad):
    with pytest.raises(SchemaError):
        validate_omega0(bad, 2)


def test_canonical_needs_even_dimension():
    with pytest.raises(SchemaError):
        canonical_omega0(3)


# quadratic ---------------------------------------------------------------

def test_quadratic_oscillator():
    act = quadratic_action(linear([[0, 1], [-1, 0]], [0, 0]))
    assert np.allclose(act.Omega, OM2, atol=1e-8)
    assert np.allclose(act.B, -np.eye(2), atol=1e-8)
    assert np.allclose(act.C, 0)


def test_quadratic_free_forcing():
    act = quadratic_action(linear([[0, 0], [0, 0]], [1, 2]))
    assert np.allclose(act.Omega, OM2)
    assert np.allclose(act.B, 0)
    assert np.allclose(act.C, OM2 @ [1, 2])


def test_quadratic_time_dependent_rotation():
    act = quadratic_action(linear([["0", "t"], ["-t", "0"]], [0, 0]))
    assert np.allclose(act.Omega, OM2, atol=1e-10)
    assert np.allclose(act.Lambda[-1], np.linalg.inv([[np.cos(0.5), np.sin(0.5)], [-np.sin(0.5), np.cos(0.5)]]), atol=1e-10)


def test_quadratic_B_symmetric_and_export():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(4, 4)).round(3)
    act = quadratic_action(linear(A.tolist(), [0.5, -1, 0, 2]))
    assert np.abs(act.B - np.swapaxes(act.B, 1, 2)).max() < 1e-10
    doc = act.to_json()
    assert set(doc[0]) == {"t", "Omega", "B", "C"} and len(doc) == 11
    assert act.dumps() == act.dumps()


@pytest.mark.parametrize("grid", [[0.5, 1.0], [0.0, 0.5, 0.5], []])
def test_quadratic_grid_validation(grid):
    with pytest.raises(SchemaError):
        quadratic_action(linear([[0, 1], [-1, 0]], [0, 0]), grid=grid)


# conditions --------------------------------------------------------------

def test_quadratic_conditions_pass():
    act = quadratic_action(linear([[0.1, 1], [-2, 0.3]], ["sin(t)", 1]))
    assert check_first_order_conditions(act, tol=1e-6).all_passed


def test_zero_field_transport_exact():
    act = first_order_action(fo(["0", "0"]))
    assert check_first_order_conditions(act)["transport"].max_residual == 0.0


@pytest.mark.parametrize("field", [["p", "-sin(q)"], ["p", "-q - 0.2*p + q^2"], ["q*p", "-p^2/2 - q"]])
def test_flow_conditions_nonlinear(field):
    act = first_order_action(fo(field))
    rep = check_first_order_conditions(act, samples=8)
    assert rep.all_passed, rep.summary()


def test_symmetric_injection_fails_antisymmetry(oscillator):
    bad = first_order_action(oscillator)
    inject = 0.25 * np.ones((2, 2))
    orig = bad.omega
    bad.omega = lambda t, x: orig(t, x) + inject
    rep = check_first_order_conditions(bad, samples=4)
    assert not rep["antisymmetry"].passed
    assert rep["antisymmetry"].max_residual == pytest.approx(0.5)
