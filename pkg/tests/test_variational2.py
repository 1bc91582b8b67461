import pytest

from conftest import matrix
from varinverse.reports import VerificationError
from varinverse.symexpr import equiv_random, mul, num, parse, sym, to_string
from varinverse.systems import SecondOrderSystem
from varinverse.variational2 import (
    CONDITION_IDS, b_matrix, build_K, build_L_ik, build_l, build_l0,
    build_lagrangian, check_multiplier, d_hat, el_residual, euler_lagrange,
)


def eq(a, b, params=None):
    return equiv_random(a, b if not isinstance(b, str) else parse(b), params or {})


# d_hat / b_matrix --------------------------------------------------------

def test_d_hat_of_coordinate(magnetic, harmonic):
    assert d_hat(magnetic, sym("x")) == sym("dx")
    assert d_hat(harmonic, sym("q")) == sym("dq")


def test_d_hat_exponential():
    s = SecondOrderSystem.from_strings(["q"], {"q": "a*dq"}, {"a": 0.4, "c": 1.3})
    assert eq(d_hat(s, parse("exp(-c*t)", s.env)), parse("-c*exp(-c*t)", s.env), s.params)


def test_d_hat_magnetic(magnetic):
    assert eq(d_hat(magnetic, sym("dx")), parse("alpha*dx - beta*dy", magnetic.env), magnetic.params)


def test_b_matrix_free_particle():
    s = SecondOrderSystem.from_strings(["x", "y"], {"x": "0", "y": "0"})
    assert all(to_string(e) == "0" for row in b_matrix(s) for e in row)


def test_b_matrix_magnetic_is_half_display(magnetic):
    # ½F² - D̂F + 2∂f/∂q with F constant: the ½ survives
    a, b = 0.3, 0.5
    expect = [[0.5 * (a * a - b * b), -a * b], [a * b, 0.5 * (a * a - b * b)]]
    B = b_matrix(magnetic)
    for i in range(2):
        for j in range(2):
            assert eq(B[i][j], parse(repr(expect[i][j])), magnetic.params)


def test_b_matrix_douglas(douglas):
    B = b_matrix(douglas)
    assert [[to_string(e) for e in row] for row in B] == [["0", "0"], ["0", "-2"]]


def test_b_matrix_constant_for_linear_velocity_dependence(dissipative):
    B = b_matrix(dissipative)
    assert all(not e.free_symbols - set(dissipative.params) for row in B for e in row)


# check_multiplier --------------------------------------------------------

def test_dissipative_multiplier_passes(dissipative):
    h = matrix([["exp(-alpha*t)", "0"], ["0", "exp(-alpha*t)"]], dissipative.env)
    rep = check_multiplier(dissipative, h)
    assert rep.all_passed
    assert rep.ids == list(CONDITION_IDS)


def test_dissipative_doubled_exponent_fails_eq11(dissipative):
    h = matrix([["exp(-2*alpha*t)", "0"], ["0", "exp(-2*alpha*t)"]], dissipative.env)
    rep = check_multiplier(dissipative, h)
    assert rep.failed() == ["sym11"]


def test_magnetic_multiplier_passes(magnetic, magnetic_h):
    assert check_multiplier(magnetic, magnetic_h).all_passed


def test_douglas_identity(douglas):
    rep = check_multiplier(douglas, matrix([["1", "0"], ["0", "1"]], douglas.env))
    assert rep["alg19"].passed
    assert not rep["sym11"].passed
    assert rep["sym11"].max_residual == pytest.approx(0.5)


def test_report_json_shape(harmonic):
    doc = check_multiplier(harmonic, [[parse("1")]]).to_json()
    assert [d["id"] for d in doc] == list(CONDITION_IDS)
    assert set(doc[0]) == {"id", "pass", "max_residual", "witness"}


def test_non_symmetric_multiplier_fails(douglas):
    rep = check_multiplier(douglas, matrix([["1", "1"], ["0", "1"]], douglas.env))
    assert not rep["sym6"].passed


def test_det_fails_for_singular(harmonic):
    rep = check_multiplier(harmonic, [[parse("0")]])
    assert not rep["det"].passed


# reconstruction ----------------------------------------------------------

def test_build_K_examples(harmonic, douglas, dissipative):
    K, _ = build_K(harmonic, [[parse("1")]])
    assert eq(K, "dq^2/2")
    K, _ = build_K(douglas, matrix([["0", "1"], ["1", "0"]], douglas.env))
    assert eq(K, "dx*dy")
    c = "exp(-alpha*t)"
    K, _ = build_K(dissipative, matrix([[c, "0"], ["0", c]], dissipative.env))
    assert eq(K, parse(f"{c}*(dx^2+dy^2)/2", dissipative.env), dissipative.params)


def test_build_K_singular_base_shift(magnetic, magnetic_h):
    K, v0 = build_K(magnetic, magnetic_h)
    assert v0 == [1.0, 0.0]


def test_build_K_rejects_non_hessian(douglas):
    # symmetric but ∂h11/∂dy != ∂h12/∂dx, so no K exists
    h = matrix([["dy", "0"], ["0", "1"]], douglas.env)
    with pytest.raises(VerificationError):
        build_K(douglas, h)


def test_magnetic_pieces(magnetic, magnetic_h):
    K, v0 = build_K(magnetic, magnetic_h)
    L_ik = build_L_ik(magnetic, magnetic_h, K, v0)
    assert all(to_string(e) == "0" for row in L_ik for e in row)
    l = build_l(magnetic, L_ik)
    assert [to_string(e) for e in l] == ["0", "0"]
    l0 = build_l0(magnetic, magnetic_h, K, L_ik, l, v0)
    assert eq(l0, parse("2*alpha*x - 2*beta*y", magnetic.env), magnetic.params)


def test_build_l_constant_curl():
    s = SecondOrderSystem.from_strings(["x", "y"], {"x": "0", "y": "0"}, {"k": 2.0})
    L_ik = matrix([["0", "k"], ["-k", "0"]], s.env)
    l = build_l(s, L_ik)
    # l_i = ½ k ε_ki q^k
    assert eq(l[0], parse("-k*y/2", s.env), s.params)
    assert eq(l[1], parse("k*x/2", s.env), s.params)


def test_harmonic_lagrangian(harmonic):
    lag = build_lagrangian(harmonic, [[parse("1")]])
    assert eq(lag.L, "dq^2/2 - q^2/2")
    assert eq(lag.l0, "-q^2/2")


def test_dissipative_lagrangian(dissipative):
    c = "exp(-alpha*t)"
    h = matrix([[c, "0"], ["0", c]], dissipative.env)
    lag = build_lagrangian(dissipative, h)
    expect = parse(f"{c}*((dx^2+dy^2)/2 + (x^2+y^2)/2)", dissipative.env)
    assert eq(lag.L, expect, dissipative.params)
    assert el_residual(dissipative, lag.L, h)[0] < 1e-8


def test_magnetic_lagrangian_matches_reference_up_to_factor(magnetic, magnetic_h):
    lag = build_lagrangian(magnetic, magnetic_h)
    env = magnetic.env
    ref = parse("dx*ln(dx^2+dy^2)/2 + dy*arctan(dx/dy) + alpha*x - beta*y", env)
    el_b = euler_lagrange(lag.L, env)
    el_r = euler_lagrange(ref, env)
    for a, b in zip(el_b, el_r):
        assert equiv_random(a, mul(num(2), b), magnetic.params, tol=1e-6)


@pytest.mark.parametrize("field", ["b", "b*(1 + x^2 + y^2)"])
def test_charged_particle_builds_vector_potential(field):
    s = SecondOrderSystem.from_strings(["x", "y"], {"x": f"{field}*dy", "y": f"-({field})*dx"}, {"b": 0.7})
    h = matrix([["1", "0"], ["0", "1"]], s.env)
    assert check_multiplier(s, h).all_passed
    lag = build_lagrangian(s, h)
    assert any(to_string(e) != "0" for e in lag.l)
    assert el_residual(s, lag.L, h)[0] < 1e-8


# euler_lagrange ----------------------------------------------------------

def test_euler_lagrange_examples(harmonic):
    env = harmonic.env
    (el,) = euler_lagrange(parse("dq^2/2 - q^2/2", env), env)
    assert eq(el, parse("-(ddq + q)", env, extra=env.accelerations))
    (el,) = euler_lagrange(parse("dq*sin(q)", env), env)
    assert to_string(el) == "0"
