import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlgn.gates import TRUTH, negation_of, surrogate_eval
from dlgn.neuron import (EstimatorKind, IwpParams, OpParams, closest_gate, discretize_iwp,
                         discretize_op, estimator_grad, estimator_value, iwp_backward,
                         iwp_forward, iwp_outputs, l1_closest_gate, minkowski_distance,
                         op_backward, op_forward, op_input_grad_symmetric, round_outputs,
                         softmax)

unit = st.floats(0.0, 1.0, allow_nan=False)
logit = st.floats(-6.0, 6.0, allow_nan=False)


def test_estimators_values():
    x = np.array([-1.0, 0.0, 0.3, 2.0])
    np.testing.assert_allclose(estimator_value(EstimatorKind.SIGMOID, x), 1 / (1 + np.exp(-x)))
    np.testing.assert_allclose(estimator_value(EstimatorKind.SIN01, x), 0.5 + 0.5 * np.sin(x))
    np.testing.assert_allclose(estimator_value(EstimatorKind.CAPPED_LINEAR_ST, x),
                               [0.0, 0.0, 0.3, 1.0])
    np.testing.assert_allclose(estimator_grad(EstimatorKind.CAPPED_LINEAR_ST, x), 1.0)
    np.testing.assert_allclose(estimator_grad(EstimatorKind.SIN01, x), 0.5 * np.cos(x))


@pytest.mark.parametrize("kind", [EstimatorKind.SIGMOID, EstimatorKind.SIN01])
def test_estimator_grad_finite_difference(kind):
    x = np.linspace(-3, 3, 13)
    h = 1e-6
    fd = (estimator_value(kind, x + h) - estimator_value(kind, x - h)) / (2 * h)
    np.testing.assert_allclose(estimator_grad(kind, x), fd, atol=1e-8)


def test_softmax_stable_for_large_logits():
    w = softmax(np.array([1000.0, 0.0, -1000.0]))
    assert np.isfinite(w).all() and abs(w.sum() - 1) < 1e-15


@given(st.lists(logit, min_size=16, max_size=16), unit, unit)
@settings(max_examples=60)
def test_op_forward_is_weighted_surrogate(z, p, q):
    prm = OpParams(np.array(z))
    w = softmax(prm.logits)
    ref = sum(w[i] * surrogate_eval(i + 1, p, q) for i in range(16))
    assert abs(op_forward(prm, p, q) - ref) < 1e-12


@given(st.lists(logit, min_size=16, max_size=16), unit, unit)
@settings(max_examples=60)
def test_op_gradients_finite_difference(z, p, q):
    prm = OpParams(np.array(z))
    g = op_backward(prm, p, q)
    h = 1e-6
    for k in range(16):
        zp, zm = np.array(z), np.array(z)
        zp[k] += h
        zm[k] -= h
        fd = (op_forward(OpParams(zp), p, q) - op_forward(OpParams(zm), p, q)) / (2 * h)
        assert abs(g.d_logits[k] - fd) < 1e-8
    assert abs(g.d_p - op_input_grad_symmetric(prm, p, q)) < 1e-12


@given(st.lists(logit, min_size=4, max_size=4), unit, unit,
       st.sampled_from(list(EstimatorKind)))
@settings(max_examples=60)
def test_iwp_is_bilinear_interpolation(z, p, q, est):
    prm = IwpParams(np.array(z), est)
    w = iwp_outputs(prm)
    ref = (1 - p) * (1 - q) * w[0] + (1 - p) * q * w[1] + p * (1 - q) * w[2] + p * q * w[3]
    assert abs(iwp_forward(prm, p, q) - ref) < 1e-12
    g = iwp_backward(prm, p, q)
    assert abs(g.d_p - ((1 - q) * (w[2] - w[0]) + q * (w[3] - w[1]))) < 1e-12
    assert abs(g.d_q - ((1 - p) * (w[1] - w[0]) + p * (w[3] - w[2]))) < 1e-12


def test_iwp_logit_grad_finite_difference(rng):
    z = rng.normal(size=4)
    prm = IwpParams(z, EstimatorKind.SIN01)
    g = iwp_backward(prm, 0.3, 0.8)
    h = 1e-6
    for k in range(4):
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        fd = (iwp_forward(IwpParams(zp, prm.estimator), 0.3, 0.8)
              - iwp_forward(IwpParams(zm, prm.estimator), 0.3, 0.8)) / (2 * h)
        assert abs(g.d_logits[k] - fd) < 1e-8


def test_iwp_can_express_every_gate():
    for gate in range(1, 17):
        z = np.where(TRUTH[gate - 1] == 1, math.pi / 2, -math.pi / 2)
        prm = IwpParams(z, EstimatorKind.SIN01)
        assert discretize_iwp(prm) == gate
        for a in (0, 1):
            for b in (0, 1):
                assert abs(iwp_forward(prm, a, b) - TRUTH[gate - 1][2 * a + b]) < 1e-12


def test_discretization_rules():
    z = np.zeros(16)
    z[6] = 3.0
    assert discretize_op(OpParams(z)) == 7
    assert round_outputs([0.2, 0.51, 0.5, 0.9]) == (0, 1, 0, 1)
    assert closest_gate([0.2, 0.51, 0.6, 0.9])[0] == 8
    assert l1_closest_gate([0.2, 0.51, 0.6, 0.9]) == 8
    assert minkowski_distance([0, 0, 1, 1], 4) == 0.0


def test_closest_gate_tie_goes_to_lowest_id():
    assert closest_gate([0.5, 0.5, 0.5, 0.5])[0] == 1


def test_non_finite_logits_rejected():
    with pytest.raises(FloatingPointError):
        op_forward(OpParams(np.full(16, np.nan)), 0.5, 0.5)


def test_negation_symmetric_form_uses_pairs():
    z = np.zeros(16)
    z[1] = 4.0
    z[negation_of(2) - 1] = 4.0
    # AND and NAND with equal weight cancel
    assert abs(op_input_grad_symmetric(OpParams(z), 0.4, 0.7)) < 1e-12
