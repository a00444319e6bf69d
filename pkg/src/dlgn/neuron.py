"""Single-neuron parametrizations.

OP: a softmax over 16 logits mixes the 16 gate surrogates.
IWP: four logits, each mapped through an output estimator to the neuron's
value at one input corner; the forward pass is the bilinear interpolation of
those corner values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import gates
from .gates import DomainError, check_unit


class EstimatorKind(str, enum.Enum):
    SIGMOID = "sigmoid"
    SIN01 = "sin01"
    CAPPED_LINEAR_ST = "capped_linear_st"


DEFAULT_ESTIMATOR = EstimatorKind.SIN01


def estimator_value(kind: EstimatorKind, x):
    kind = EstimatorKind(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is EstimatorKind.SIGMOID:
        # split by sign to avoid overflow in exp
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    if kind is EstimatorKind.SIN01:
        return 0.5 + 0.5 * np.sin(x)
    return np.clip(x, 0.0, 1.0)


def estimator_grad(kind: EstimatorKind, x):
    """Derivative used in backward; the capped linear estimator is straight-through."""
    kind = EstimatorKind(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind is EstimatorKind.SIGMOID:
        s = estimator_value(kind, x)
        return s * (1.0 - s)
    if kind is EstimatorKind.SIN01:
        return 0.5 * np.cos(x)
    return np.ones_like(x)


def estimator_center(kind: EstimatorKind) -> float:
    """Logit at which the estimator outputs 0.5."""
    return 0.5 if EstimatorKind(kind) is EstimatorKind.CAPPED_LINEAR_ST else 0.0


@dataclass
class OpParams:
    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (16,):
            raise ValueError(f"OP neuron needs 16 logits, got shape {self.logits.shape}")


@dataclass
class IwpParams:
    logits: np.ndarray
    estimator: EstimatorKind = DEFAULT_ESTIMATOR

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (4,):
            raise ValueError(f"IWP neuron needs 4 logits, got shape {self.logits.shape}")
        self.estimator = EstimatorKind(self.estimator)


@dataclass
class NeuronGrad:
    d_p: float
    d_q: float
    d_logits: np.ndarray = field(repr=False)


def _check_finite(logits: np.ndarray) -> None:
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("non-finite neuron logits")


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def op_weights(params: OpParams) -> np.ndarray:
    _check_finite(params.logits)
    return softmax(params.logits)


def op_forward(params: OpParams, p: float, q: float) -> float:
    check_unit("p", p)
    check_unit("q", q)
    w = op_weights(params)
    return float(sum(w[i] * gates.surrogate_eval(i + 1, p, q) for i in range(16)))


def op_backward(params: OpParams, p: float, q: float, upstream: float = 1.0) -> NeuronGrad:
    check_unit("p", p)
    check_unit("q", q)
    w = op_weights(params)
    g = np.array([gates.surrogate_eval(i + 1, p, q) for i in range(16)])
    dg = np.array([gates.surrogate_grad(i + 1, p, q) for i in range(16)])
    d_p = float(w @ dg[:, 0])
    d_q = float(w @ dg[:, 1])
    # softmax Jacobian: d out / d logit_k = w_k (g_k - sum_j w_j g_j)
    d_logits = w * (g - w @ g)
    return NeuronGrad(upstream * d_p, upstream * d_q, upstream * d_logits)


def op_input_grad_symmetric(params: OpParams, p: float, q: float) -> float:
    """d/dp written as the sum over negation pairs, ``sum_{i<=8} (w_i - w_{17-i}) dg_i/dp``."""
    w = op_weights(params)
    total = 0.0
    for i in range(1, 9):
        total += (w[i - 1] - w[16 - i]) * gates.surrogate_grad(i, p, q)[0]
    return total


def iwp_outputs(params: IwpParams) -> np.ndarray:
    _check_finite(params.logits)
    return estimator_value(params.estimator, params.logits)


def corner_basis(p, q):
    """Bilinear basis factors e_00, e_01, e_10, e_11 at (p, q)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return np.stack([(1 - p) * (1 - q), (1 - p) * q, p * (1 - q), p * q], axis=-1)


def iwp_forward(params: IwpParams, p: float, q: float) -> float:
    check_unit("p", p)
    check_unit("q", q)
    w00, w01, w10, w11 = iwp_outputs(params)
    return float((1 - p) * (1 - q) * w00 + (1 - p) * q * w01 + p * (1 - q) * w10 + p * q * w11)


def iwp_backward(params: IwpParams, p: float, q: float, upstream: float = 1.0) -> NeuronGrad:
    check_unit("p", p)
    check_unit("q", q)
    w00, w01, w10, w11 = iwp_outputs(params)
    d_p = (1 - q) * (w10 - w00) + q * (w11 - w01)
    d_q = (1 - p) * (w01 - w00) + p * (w11 - w10)
    d_logits = corner_basis(p, q) * estimator_grad(params.estimator, params.logits)
    return NeuronGrad(upstream * float(d_p), upstream * float(d_q), upstream * d_logits)


def discretize_op(params: OpParams) -> int:
    # np.argmax returns the first maximum, i.e. the lowest gate id on ties
    return int(np.argmax(op_weights(params))) + 1


def round_outputs(outputs) -> tuple[int, ...]:
    return tuple(int(v > 0.5) for v in np.asarray(outputs, dtype=np.float64))


def discretize_iwp(params: IwpParams) -> int:
    return gates.gate_from_bits(round_outputs(iwp_outputs(params)))


_TRUTH_F = gates.TRUTH.astype(np.float64)


def minkowski_distance(outputs, gate: int, order: float = 1.0) -> float:
    diff = np.abs(np.asarray(outputs, dtype=np.float64) - gates.TRUTH[gates.check_gate(gate) - 1])
    return float(np.sum(diff ** order) ** (1.0 / order))


def closest_gate(outputs, order: float = 1.0) -> tuple[int, float]:
    """Brute force over all 16 gates; ties go to the lowest id."""
    out = np.asarray(outputs, dtype=np.float64)
    if out.shape != (4,):
        raise ValueError("expected the 4 corner outputs")
    check_unit("outputs", out)
    d = np.sum(np.abs(out - _TRUTH_F) ** order, axis=1) ** (1.0 / order)
    best = int(np.argmin(d))  # first minimum, i.e. lowest gate id
    return best + 1, float(d[best])


def l1_closest_gate(outputs) -> int:
    return closest_gate(outputs, 1.0)[0]


def op_corner_outputs(params: OpParams) -> np.ndarray:
    """Neuron output at the four binary corners."""
    return np.array([op_forward(params, a, b) for a, b in ((0, 0), (0, 1), (1, 0), (1, 1))])


__all__ = [
    "DomainError", "EstimatorKind", "IwpParams", "NeuronGrad", "OpParams",
    "closest_gate", "corner_basis", "discretize_iwp", "discretize_op",
    "estimator_grad", "estimator_value", "iwp_backward", "iwp_forward",
    "iwp_outputs", "l1_closest_gate", "op_backward", "op_forward", "op_weights",
]
