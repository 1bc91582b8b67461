import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import corpus_doc
from varinverse.estimators import (
    FirstOrderFlowAction, ObstructionError, QuadraticActionEstimator, SecondOrderInverse,
)
from varinverse.systems import SchemaError


def test_second_order_search_and_transform():
    est = SecondOrderInverse(ansatz="scaled_time").fit(corpus_doc("dissipative.json"))
    assert est.report_.all_passed and est.n_features_in_ == 7
    X = np.random.default_rng(0).uniform(-1, 1, (6, 7))
    t, x, y, dx, dy, ax, ay = X.T
    c = np.exp(-0.3 * t)
    expect = -c[:, None] * np.stack([ax - x - 0.3 * dx, ay - y - 0.3 * dy], axis=1)
    assert np.allclose(est.transform(X), expect, atol=1e-12)


def test_second_order_explicit_multiplier(magnetic):
    entries = corpus_doc("magnetic_multiplier.json")["entries"]
    est = SecondOrderInverse(multiplier=entries).fit(magnetic)
    assert est.lagrangian_.to_json()["l"] == ["0", "0"]


def test_obstruction_raises(douglas):
    with pytest.raises(ObstructionError) as err:
        SecondOrderInverse(ansatz="diagonal_functions").fit(douglas)
    assert err.value.obstruction.terminal == "det=0"


def test_bad_multiplier_rejected(douglas):
    with pytest.raises(ValueError):
        SecondOrderInverse(multiplier=[["1", "0"], ["0", "1"]]).fit(douglas)


def test_params_and_clone():
    est = SecondOrderInverse(ansatz="constant", samples=8)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((1, 4)))


def test_transform_checks_width():
    est = SecondOrderInverse().fit({"kind": "second_order", "coordinates": ["q"], "forces": {"q": "-q"}})
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 5)))


def test_flow_and_quadratic_agree():
    doc = corpus_doc("oscillator_linear.json")
    quad = QuadraticActionEstimator().fit(doc)
    flow = FirstOrderFlowAction().fit(doc)
    assert flow.report_.all_passed
    X = np.random.default_rng(1).uniform(-1, 1, (4, 5))
    assert np.allclose(quad.transform(X), flow.transform(X), atol=1e-8)


def test_quadratic_transform_is_multiplied_equations():
    doc = corpus_doc("oscillator_linear.json")
    est = QuadraticActionEstimator().fit(doc)
    X = np.random.default_rng(2).uniform(-1, 1, (5, 5))
    t, x1, x2, v1, v2 = X.T
    resid = np.stack([v1 - x2, v2 + 2.0 * x1 - np.sin(t)], axis=1)
    Om = est.action_.matrices(t)[0]
    assert np.allclose(est.transform(X), np.einsum("pab,pb->pa", Om, resid), atol=1e-9)


def test_quadratic_rejects_nonlinear():
    with pytest.raises(SchemaError):
        QuadraticActionEstimator().fit(corpus_doc("pendulum.json"))


def test_flow_reduces_second_order(harmonic):
    est = FirstOrderFlowAction(samples=4).fit(harmonic)
    assert est.system_.N == 2 and est.n_features_in_ == 5
